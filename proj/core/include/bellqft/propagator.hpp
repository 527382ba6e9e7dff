#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "bellqft/fock.hpp"
#include "bellqft/model.hpp"

namespace bellqft {

enum class PropagationMethod { Eigendecomposition, CrankNicolson };

struct PropagatorPlan {
  PropagationMethod method = PropagationMethod::Eigendecomposition;
  double dt_psi = 0.01;
  double t_final = 1.0;
  std::vector<double> sample_times;

  void validate() const;
};

/// Psi_t at an increasing list of times. Immutable once built; shared
/// read-only by trajectory workers.
class StateSeries {
 public:
  StateSeries() = default;

  void push_back(double t, FockVector psi);

  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  double time(std::size_t i) const { return times_[i]; }
  const FockVector& state(std::size_t i) const { return states_[i]; }
  const std::vector<double>& times() const { return times_; }

  /// Index of the stored time equal to t (relative tolerance 1e-9);
  /// throws ValidationError if t is not stored.
  std::size_t index_of(double t) const;
  const FockVector& at(double t) const { return states_[index_of(t)]; }

 private:
  std::vector<double> times_;
  std::vector<FockVector> states_;
};

/// Exact propagation through a dense eigendecomposition of H.
class SpectralPropagator {
 public:
  static constexpr std::size_t kMaxDimension = 3000;

  SpectralPropagator(const SparseOperator& hamiltonian, double hbar);

  Eigen::VectorXcd evolve(const Eigen::VectorXcd& u0, double t) const;
  const Eigen::VectorXd& eigenvalues() const { return energies_; }
  const Eigen::MatrixXcd& eigenvectors() const { return modes_; }

 private:
  double hbar_;
  Eigen::VectorXd energies_;
  Eigen::MatrixXcd modes_;
};

/// Cayley form (1 + i dt H / 2hbar) u' = (1 - i dt H / 2hbar) u, sparse LU.
class CrankNicolsonStepper {
 public:
  static constexpr std::size_t kMaxDimension = 100000;

  CrankNicolsonStepper(const SparseOperator& hamiltonian, double hbar, double dt);

  void step(Eigen::VectorXcd& u) const;
  double dt() const { return dt_; }

 private:
  double dt_;
  SparseOperator explicit_half_;
  std::shared_ptr<Eigen::SparseLU<SparseOperator>> solver_;
};

/// Propagate raw vectors (orthonormal coordinates) to plan.sample_times.
std::vector<Eigen::VectorXcd> evolve_vectors(const SparseOperator& hamiltonian, double hbar,
                                             const Eigen::VectorXcd& u0, const PropagatorPlan& plan);

/// Solve i hbar dPsi/dt = H Psi; returns Psi at plan.sample_times.
StateSeries evolve(const FockVector& psi0, const OperatorBlocks& ops, const PropagatorPlan& plan);

/// Psi on the uniform mesh t_j = j * step, j = 0 .. round(t_final / step).
StateSeries evolve_mesh(const FockVector& psi0, const OperatorBlocks& ops, double t_final, double step,
                        PropagationMethod method = PropagationMethod::Eigendecomposition);

/// d|Psi(q)|^2/dt per tuple, computed algebraically as (2/hbar) Im conj(u) (H u)
/// in orthonormal coordinates (signed SectorField).
SectorField density_rate(const FockVector& psi, const OperatorBlocks& ops);

/// Re <Psi, op Psi>.
double expectation(const FockVector& psi, const SparseOperator& op);

}  // namespace bellqft
