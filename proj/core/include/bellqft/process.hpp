#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bellqft/fock.hpp"
#include "bellqft/jumps.hpp"
#include "bellqft/model.hpp"
#include "bellqft/propagator.hpp"

namespace bellqft {

enum class ProcessMode { Continuum, Lattice };

const char* to_string(ProcessMode mode);

struct JumpEvent {
  double time = 0.0;
  JumpKind kind = JumpKind::Creation;
  Configuration before;
  Configuration after;

  bool operator==(const JumpEvent&) const = default;
};

enum class TrajectoryStatus { Ok, Failed };

/// One sample path. Paths are right-continuous: the configuration recorded at
/// a sample time already includes a jump drawn in the step ending there.
struct Trajectory {
  std::uint64_t seed = 0;
  std::size_t index = 0;
  ProcessMode mode = ProcessMode::Lattice;
  std::vector<double> sample_times;
  std::vector<Configuration> samples;
  std::vector<JumpEvent> events;
  int node_freezes = 0;
  TrajectoryStatus status = TrajectoryStatus::Ok;
  std::string failure;

  bool ok() const { return status == TrajectoryStatus::Ok; }
  bool operator==(const Trajectory&) const = default;
};

struct ProcessSettings {
  ProcessMode mode = ProcessMode::Lattice;
  double dt = 0.01;
  double t_final = 1.0;
  std::vector<double> sample_times;  // multiples of dt in [0, t_final]
  bool jitter = false;               // continuum initial positions spread over cells
  int max_consecutive_freezes = 10;

  void validate() const;
};

/// Everything a trajectory worker reads; immutable and shared.
///
/// The state series is Psi on the mesh t_j = j dt / 2 so that both the step
/// start and the step midpoint are available without interpolation.
class ProcessContext {
 public:
  ProcessContext(ModelSpec spec, const StateSeries& mesh, ProcessSettings settings);

  const ModelSpec& spec() const { return spec_; }
  const ProcessSettings& settings() const { return settings_; }
  const AtomTable& atoms() const { return atoms_; }
  const TransitionKernel& kernel() const { return kernel_; }
  const StateSeries& mesh() const { return *mesh_; }

  /// Psi at t = j dt / 2.
  const FockVector& half_step_state(std::size_t j) const { return mesh_->state(j); }
  std::span<const double> half_step_floors(std::size_t j) const { return floors_[j]; }
  std::size_t steps() const { return steps_; }

 private:
  ModelSpec spec_;
  const StateSeries* mesh_;
  ProcessSettings settings_;
  AtomTable atoms_;
  TransitionKernel kernel_;
  std::vector<std::vector<double>> floors_;
  std::size_t steps_;
};

/// Build Psi on the half-step mesh required by ProcessContext.
StateSeries process_mesh(const FockVector& psi0, const OperatorBlocks& ops, const ProcessSettings& settings,
                         PropagationMethod method = PropagationMethod::Eigendecomposition);

/// Alternate flow (continuum mode) and a thinned jump draw with rates at the
/// step midpoint. Node hits freeze the configuration for one step; more than
/// max_consecutive_freezes in a row, or a jump-guard violation, marks the
/// trajectory failed instead of throwing.
Trajectory run_trajectory(const ProcessContext& ctx, const Configuration& q0, Rng& rng, std::uint64_t seed = 0);

struct EnsembleResult {
  std::vector<Trajectory> trajectories;

  std::size_t failed_count() const;
  std::vector<std::uint64_t> failed_seeds() const;
};

/// M trajectories; trajectory i uses Rng(stream_seed(root_seed, i)) and draws
/// its initial configuration from |Psi_0|^2 first. Output is independent of
/// `parallelism` (0 = hardware concurrency).
EnsembleResult run_ensemble(const ProcessContext& ctx, std::size_t count, std::uint64_t root_seed,
                            unsigned parallelism = 0);

inline constexpr int kTrajectorySchemaVersion = 1;

nlohmann::json to_json(const Trajectory& trajectory);

/// Header line ({"schema_version", "config_hash", "created", ...}) followed by
/// one compact JSON record per trajectory.
void write_trajectories_jsonl(std::ostream& out, const EnsembleResult& ensemble, const nlohmann::json& header);

}  // namespace bellqft
