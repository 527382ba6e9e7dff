#include "bellqft/propagator.hpp"

#include <cmath>
#include <string>

#include "bellqft/error.hpp"

namespace bellqft {

namespace {

bool on_mesh(double t, double step) {
  const double r = t / step;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

void require_normalized(const FockVector& psi) {
  if (std::abs(psi.norm() - 1.0) > 1e-6) throw ValidationError("initial state must be normalized");
}

}  // namespace

void PropagatorPlan::validate() const {
  if (!(dt_psi > 0.0) || !std::isfinite(dt_psi)) throw ValidationError("propagator.dt_psi must be positive");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw ValidationError("propagator.t_final must be nonnegative");
  const double slack = 1e-9 * std::max(1.0, t_final);
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    const double t = sample_times[i];
    if (t < -slack || t > t_final + slack) {
      throw ValidationError("propagator.sample_times must lie in [0, t_final]");
    }
    if (i > 0 && !(t > sample_times[i - 1])) throw ValidationError("propagator.sample_times must be increasing");
    if (method == PropagationMethod::CrankNicolson && !on_mesh(t, dt_psi)) {
      throw ValidationError("propagator.sample_times must be multiples of dt_psi for crank_nicolson");
    }
  }
}

void StateSeries::push_back(double t, FockVector psi) {
  if (!times_.empty() && !(t > times_.back())) throw ValidationError("state series times must increase");
  times_.push_back(t);
  states_.push_back(std::move(psi));
}

std::size_t StateSeries::index_of(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t - 1e-9 * std::max(1.0, std::abs(t)));
  if (it != times_.end() && std::abs(*it - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
    return static_cast<std::size_t>(std::distance(times_.begin(), it));
  }
  throw ValidationError("no stored state at t = " + std::to_string(t));
}

SpectralPropagator::SpectralPropagator(const SparseOperator& hamiltonian, double hbar) : hbar_(hbar) {
  if (static_cast<std::size_t>(hamiltonian.rows()) > kMaxDimension) {
    throw DimensionError("eigendecomposition supports total dimension <= 3000; use crank_nicolson");
  }
  const Eigen::MatrixXcd dense(hamiltonian);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(dense);
  if (eig.info() != Eigen::Success) throw SolverError("eigendecomposition of H failed");
  energies_ = eig.eigenvalues();
  modes_ = eig.eigenvectors();
}

Eigen::VectorXcd SpectralPropagator::evolve(const Eigen::VectorXcd& u0, double t) const {
  Eigen::VectorXcd coeffs = modes_.adjoint() * u0;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    coeffs[i] *= std::exp(cplx(0.0, -energies_[i] * t / hbar_));
  }
  return modes_ * coeffs;
}

CrankNicolsonStepper::CrankNicolsonStepper(const SparseOperator& hamiltonian, double hbar, double dt) : dt_(dt) {
  if (static_cast<std::size_t>(hamiltonian.rows()) > kMaxDimension) {
    throw DimensionError("crank_nicolson supports total dimension <= 100000");
  }
  SparseOperator identity(hamiltonian.rows(), hamiltonian.cols());
  identity.setIdentity();
  const cplx half(0.0, dt / (2.0 * hbar));
  SparseOperator implicit_half = identity + half * hamiltonian;
  explicit_half_ = identity - half * hamiltonian;
  implicit_half.makeCompressed();
  solver_ = std::make_shared<Eigen::SparseLU<SparseOperator>>();
  solver_->compute(implicit_half);
  if (solver_->info() != Eigen::Success) throw SolverError("sparse LU factorization of the Cayley operator failed");
}

void CrankNicolsonStepper::step(Eigen::VectorXcd& u) const {
  const Eigen::VectorXcd rhs = explicit_half_ * u;
  u = solver_->solve(rhs);
  if (solver_->info() != Eigen::Success) throw SolverError("Crank-Nicolson solve failed");
}

std::vector<Eigen::VectorXcd> evolve_vectors(const SparseOperator& hamiltonian, double hbar,
                                             const Eigen::VectorXcd& u0, const PropagatorPlan& plan) {
  plan.validate();
  std::vector<Eigen::VectorXcd> out;
  out.reserve(plan.sample_times.size());
  if (plan.method == PropagationMethod::Eigendecomposition) {
    const SpectralPropagator prop(hamiltonian, hbar);
    for (double t : plan.sample_times) out.push_back(prop.evolve(u0, t));
    return out;
  }

  const CrankNicolsonStepper stepper(hamiltonian, hbar, plan.dt_psi);
  Eigen::VectorXcd u = u0;
  long done = 0;
  for (double t : plan.sample_times) {
    const long target = std::lround(t / plan.dt_psi);
    for (; done < target; ++done) stepper.step(u);
    out.push_back(u);
  }
  return out;
}

StateSeries evolve(const FockVector& psi0, const OperatorBlocks& ops, const PropagatorPlan& plan) {
  require_normalized(psi0);
  if (!(psi0.space() == ops.space)) throw ValidationError("state and operators live on different spaces");
  const auto vectors = evolve_vectors(ops.total, ops.hbar, psi0.to_orthonormal(), plan);
  StateSeries series;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    series.push_back(plan.sample_times[i], FockVector::from_orthonormal(ops.space, vectors[i]));
  }
  return series;
}

StateSeries evolve_mesh(const FockVector& psi0, const OperatorBlocks& ops, double t_final, double step,
                        PropagationMethod method) {
  if (!(step > 0.0)) throw ValidationError("mesh step must be positive");
  if (!on_mesh(t_final, step)) throw ValidationError("t_final must be a multiple of the mesh step");
  PropagatorPlan plan;
  plan.method = method;
  plan.dt_psi = step;
  plan.t_final = t_final;
  const long count = std::lround(t_final / step);
  for (long j = 0; j <= count; ++j) plan.sample_times.push_back(static_cast<double>(j) * step);
  plan.sample_times.back() = t_final;
  return evolve(psi0, ops, plan);
}

SectorField density_rate(const FockVector& psi, const OperatorBlocks& ops) {
  const Eigen::VectorXcd u = psi.to_orthonormal();
  const Eigen::VectorXcd hu = ops.total * u;
  SectorField rate(psi.space());
  const auto& space = psi.space();
  for (int n = 0; n <= space.n_max(); ++n) {
    auto& b = rate.blocks[static_cast<std::size_t>(n)];
    const auto off = static_cast<Eigen::Index>(space.offset(n));
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b[i] = (2.0 / ops.hbar) * std::imag(std::conj(u[off + i]) * hu[off + i]);
    }
  }
  return rate;
}

double expectation(const FockVector& psi, const SparseOperator& op) {
  const Eigen::VectorXcd u = psi.to_orthonormal();
  return std::real(u.dot(op * u));
}

}  // namespace bellqft
