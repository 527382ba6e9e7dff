#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bellqft/fock.hpp"
#include "bellqft/jumps.hpp"
#include "bellqft/model.hpp"
#include "bellqft/process.hpp"
#include "bellqft/propagator.hpp"

namespace bellqft {

struct Thresholds {
  double tv_max = 0.05;
  double p_min = 1e-3;

  void validate() const;
};

/// Total variation distance 1/2 sum |p - q|.
double total_variation(std::span<const double> p, std::span<const double> q);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int bins = 0;          // bins after pooling
  int pooled_bins = 0;   // original bins merged because their expected count was below 5
};

/// Pearson goodness of fit of `counts` against `probabilities`. Bins with
/// expected count below 5 are pooled in order of increasing expectation.
ChiSquareResult chi_square(std::span<const double> counts, std::span<const double> probabilities);

/// Maps atoms onto histogram bins. The identity binning uses one bin per atom;
/// coarse binning groups sites into `cells` consecutive cells and bins each
/// configuration by its multiset of cells.
class Binning {
 public:
  static Binning atoms(const AtomTable& atoms);
  static Binning cells(const AtomTable& atoms, int cells);

  std::size_t bin_count() const { return bin_count_; }
  int bin_of(std::size_t atom) const { return map_[atom]; }
  int sector_of_bin(std::size_t bin) const { return bin_sector_[bin]; }
  std::vector<double> aggregate(std::span<const double> per_atom) const;

 private:
  std::vector<int> map_;
  std::vector<int> bin_sector_;
  std::size_t bin_count_ = 0;
};

/// Target probabilities per atom, |Psi|^2 integrated over each atom.
std::vector<double> atom_probabilities(const FockVector& psi, const AtomTable& atoms);

struct SectorRow {
  int sector = 0;
  double empirical = 0.0;
  double target = 0.0;
};

struct TimeReport {
  double t = 0.0;
  double tv = 0.0;
  ChiSquareResult chi2;
  std::vector<SectorRow> sectors;
  std::vector<double> empirical;  // per bin
  std::vector<double> target;     // per bin
  bool pass = false;
};

struct EquivarianceReport {
  std::string label;
  ProcessMode mode = ProcessMode::Lattice;
  double dt = 0.0;
  std::size_t ensemble_size = 0;
  std::size_t used = 0;
  std::vector<std::uint64_t> failed_seeds;  // excluded from the statistics
  Thresholds thresholds;
  std::vector<TimeReport> times;
  bool pass = false;

  nlohmann::json to_json() const;
  std::string summary() const;
};

/// Compare the ensemble's configurations at each of its sample times with
/// |Psi_t|^2 from `series`. Failed trajectories are excluded and listed.
EquivarianceReport equivariance_test(const EnsembleResult& ensemble, const StateSeries& series,
                                     const AtomTable& atoms, const Thresholds& thresholds, double dt,
                                     ProcessMode mode);
EquivarianceReport equivariance_test(const EnsembleResult& ensemble, const StateSeries& series,
                                     const AtomTable& atoms, const Binning& binning,
                                     const Thresholds& thresholds, double dt, ProcessMode mode);

/// An ensemble drawn directly from given laws, one law per sample time, with
/// no dynamics. Passing the same law for every time gives the frozen negative
/// control; passing |Psi_t|^2 gives the calibration case.
EnsembleResult direct_ensemble(const std::vector<FockVector>& laws, const std::vector<double>& sample_times,
                               std::size_t count, std::uint64_t root_seed);

struct GeneratorReport {
  double max_error = 0.0;
  int worst_atom = -1;
  std::vector<double> sector_max_error;
  double tolerance = 1e-10;

  bool passed() const { return max_error <= tolerance; }
};

/// For every atom q, |sum_{q'} net_flux(q, q') - d rho(q)/dt| with the full H
/// (lattice links), the time derivative taken from the Schrodinger equation.
GeneratorReport generator_identity_check(const FockVector& psi, const TransitionKernel& kernel,
                                         const OperatorBlocks& ops, double tolerance = 1e-10);

struct EquivalenceItem {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  int worst_atom = -1;
  bool passed = true;
  std::string detail;
};

struct PvEquivalenceReport {
  std::vector<EquivalenceItem> items;
  std::size_t configurations = 0;
  std::size_t nodes = 0;  // configurations both paths agree are nodes

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Compares the direct and PV forms of velocities and jump rates at each
/// listed atom. An empty list means every atom.
PvEquivalenceReport pv_equivalence_check(const FockVector& psi, const ModelSpec& spec, const OperatorBlocks& ops,
                                         const TransitionKernel& kernel, std::span<const int> atom_ids = {});

struct ChainLaw {
  std::vector<std::vector<double>> laws;  // one per sample time
  /// Mass removed because it sat on an atom whose jump probability per step
  /// exceeded the guard; such trajectories fail instead of moving.
  double failed_mass = 0.0;
};

/// Exact law of the lattice-mode chain over atoms: the trajectory loop's
/// transition matrix iterated deterministically, evaluated at the context's
/// sample times. Node sources stay put, as trajectories do.
ChainLaw lattice_chain_law(const ProcessContext& ctx, std::span<const double> initial);

// ---------------------------------------------------------------------------
// Convergence study

struct ConvergenceCase {
  ProcessMode mode = ProcessMode::Continuum;
  int n_sites = 8;
  double dt = 0.01;
  std::size_t trajectories = 1000;
};

/// Fixed physics for a ladder of discretizations. The grid length stays
/// fixed; `cells` must divide every n_sites in the ladder.
struct ConvergenceScenario {
  ModelSpec model{GridSpec(8.0, 8)};
  InitialStateSpec initial;
  double t_final = 1.0;
  int cells = 4;
  bool jitter = false;  // continuum initial positions spread over cells
  std::uint64_t root_seed = 1;
  unsigned parallelism = 0;
};

struct ConvergenceRow {
  ConvergenceCase setting;
  double tv = 0.0;         // coarse-bin TV at t_final
  double sector_tv = 0.0;  // TV of sector masses at t_final
  double chain_tv = -1.0;  // lattice only: TV of the exact chain law, no sampling noise
  std::vector<double> sector_empirical;
  std::vector<double> sector_target;
  std::size_t failed = 0;
};

ConvergenceRow run_convergence_case(const ConvergenceScenario& scenario, const ConvergenceCase& setting);
std::vector<ConvergenceRow> convergence_study(const ConvergenceScenario& scenario,
                                              const std::vector<ConvergenceCase>& ladder);
std::string format_convergence_table(const std::vector<ConvergenceRow>& rows);

}  // namespace bellqft
