#pragma once

#include <functional>
#include <span>
#include <vector>

#include "bellqft/fock.hpp"
#include "bellqft/model.hpp"
#include "bellqft/propagator.hpp"

namespace bellqft {

struct VelocityEval {
  Configuration q;
  std::vector<double> velocity;  // one component per particle, length/time
  int sector = 0;
  /// |rate(f) - v . grad f| for an affine test function (commutator form only).
  double gradient_form_defect = 0.0;
};

/// A real function on the ordered tuples of one sector.
using GridFunction = std::function<double(std::span<const int>)>;

/// Bohm velocity (hbar/m) Im(conj(Psi) D_i Psi) / |Psi|^2 at a grid tuple, with
/// D_i the periodic central difference in coordinate i. Throws NodeError when
/// the tuple's probability is at or below node_floor.
std::vector<double> grid_velocity(const FockVector& psi, const ModelSpec& spec, std::span<const int> sites);
std::vector<double> grid_velocity(const FockVector& psi, const ModelSpec& spec, std::span<const int> sites,
                                  double floor);

/// Bohm velocity at a continuum configuration: grid velocities multilinearly
/// interpolated over the surrounding cell. Corners at nodes are dropped; all
/// corners at nodes raises NodeError.
VelocityEval velocity_bohm(const FockVector& psi, const ModelSpec& spec, const Configuration& q);
/// As above with precomputed node_floors(psi).
VelocityEval velocity_bohm(const FockVector& psi, const ModelSpec& spec, const Configuration& q,
                           std::span<const double> floors);

/// Re conj(Psi) ((i/hbar)[H0, f] Psi) / |Psi|^2 at a grid tuple.
double function_rate(const FockVector& psi, const OperatorBlocks& ops, std::span<const int> sites,
                     const GridFunction& f);

/// Same quantity through the PV measure:
/// Re <Psi| P(q) (i/hbar)[H0, f] |Psi> / <Psi| P(q) |Psi>, with P(q) = pv_project
/// onto the single tuple.
double function_rate_pv(const FockVector& psi, const OperatorBlocks& ops, std::span<const int> sites,
                        const GridFunction& f);

/// Coordinate i as a grid function, unwrapped in a chart centred on `origin`.
GridFunction coordinate_chart(const GridSpec& grid, std::span<const int> origin, int coordinate);

/// Velocity from the commutator form at the nearest grid configuration of q.
VelocityEval velocity_commutator(const FockVector& psi, const OperatorBlocks& ops, const ModelSpec& spec,
                                 const Configuration& q);

/// Velocity from the PV form at the nearest grid configuration of q.
VelocityEval velocity_pv(const FockVector& psi, const OperatorBlocks& ops, const ModelSpec& spec,
                         const Configuration& q);

/// c (psi^dagger alpha psi) / (psi^dagger psi) at x, alpha = sigma_x, linearly
/// interpolated between the neighbouring sites.
double velocity_dirac(const Eigen::VectorXcd& spinor, const GridSpec& grid, double c, double x);

/// One explicit-midpoint step of dQ/dt = v(Q) using Psi at t and t + dt/2.
Configuration flow_step(const FockVector& psi_start, const FockVector& psi_mid, const ModelSpec& spec,
                        const Configuration& q, double dt);
Configuration flow_step(const FockVector& psi_start, std::span<const double> floors_start,
                        const FockVector& psi_mid, std::span<const double> floors_mid, const ModelSpec& spec,
                        const Configuration& q, double dt);

struct PathSegment {
  std::vector<double> times;
  std::vector<Configuration> configurations;
};

/// Integrate the flow from t0 to t1 in steps dt. The series must contain Psi
/// at every t0 + j dt/2. NodeError is rethrown with time and positions attached.
PathSegment integrate_flow(const StateSeries& series, const ModelSpec& spec, const Configuration& q0, double t0,
                           double t1, double dt);

struct DiracSample {
  double t;
  double x;
  double v;
};

/// Midpoint integration of a single Dirac particle; `mesh[j]` is the spinor at
/// t = j dt / 2.
std::vector<DiracSample> integrate_dirac_flow(const std::vector<Eigen::VectorXcd>& mesh, const GridSpec& grid,
                                              double c, double x0, double dt);

}  // namespace bellqft
