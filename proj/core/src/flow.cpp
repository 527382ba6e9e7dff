#include "bellqft/flow.hpp"

#include <cmath>
#include <string>

#include "bellqft/error.hpp"

namespace bellqft {

namespace {

std::vector<int> snap(const GridSpec& grid, const Configuration& q) {
  std::vector<int> sites;
  sites.reserve(q.positions.size());
  for (double x : q.positions) sites.push_back(grid.nearest_site(x));
  return sites;
}

std::string describe(std::span<const int> sites) {
  std::string s = "(";
  for (std::size_t i = 0; i < sites.size(); ++i) s += (i ? "," : "") + std::to_string(sites[i]);
  return s + ")";
}

}  // namespace

std::vector<double> grid_velocity(const FockVector& psi, const ModelSpec& spec, std::span<const int> sites) {
  return grid_velocity(psi, spec, sites, node_floor(psi, static_cast<int>(sites.size())));
}

std::vector<double> grid_velocity(const FockVector& psi, const ModelSpec& spec, std::span<const int> sites,
                                  double floor) {
  const auto& space = psi.space();
  const auto& grid = spec.grid;
  const int n = static_cast<int>(sites.size());
  const std::size_t idx = space.encode(sites);
  const cplx value = psi.at(n, idx);
  const double prob = space.weight(n) * std::norm(value);
  if (!(prob > floor)) throw NodeError("configuration " + describe(sites) + " is at a node");

  std::vector<int> work(sites.begin(), sites.end());
  std::vector<double> v(static_cast<std::size_t>(n));
  const double scale = spec.hbar / (spec.mass * 2.0 * grid.spacing() * std::norm(value));
  for (int i = 0; i < n; ++i) {
    auto& s = work[static_cast<std::size_t>(i)];
    const int original = s;
    s = grid.wrap(original + 1);
    const cplx ahead = psi.at(n, space.encode(work));
    s = grid.wrap(original - 1);
    const cplx behind = psi.at(n, space.encode(work));
    s = original;
    v[static_cast<std::size_t>(i)] = scale * std::imag(std::conj(value) * (ahead - behind));
  }
  return v;
}

VelocityEval velocity_bohm(const FockVector& psi, const ModelSpec& spec, const Configuration& q) {
  return velocity_bohm(psi, spec, q, node_floors(psi));
}

VelocityEval velocity_bohm(const FockVector& psi, const ModelSpec& spec, const Configuration& q,
                           std::span<const double> floors) {
  const auto& grid = spec.grid;
  const int n = static_cast<int>(q.sector());
  VelocityEval out{q, std::vector<double>(static_cast<std::size_t>(n), 0.0), n, 0.0};
  if (n == 0) return out;

  std::vector<int> base(static_cast<std::size_t>(n));
  std::vector<double> frac(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = grid.wrap_position(q.positions[static_cast<std::size_t>(i)]) / grid.spacing();
    const double fl = std::floor(u);
    base[static_cast<std::size_t>(i)] = grid.wrap(static_cast<long>(fl));
    frac[static_cast<std::size_t>(i)] = u - fl;
  }

  std::vector<int> corner(static_cast<std::size_t>(n));
  double total_weight = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      const bool upper = (mask >> i) & 1u;
      const double f = frac[static_cast<std::size_t>(i)];
      w *= upper ? f : 1.0 - f;
      corner[static_cast<std::size_t>(i)] = grid.wrap(base[static_cast<std::size_t>(i)] + (upper ? 1 : 0));
    }
    if (w == 0.0) continue;
    std::vector<double> v;
    try {
      v = grid_velocity(psi, spec, corner, floors[static_cast<std::size_t>(n)]);
    } catch (const NodeError&) {
      continue;
    }
    total_weight += w;
    for (int i = 0; i < n; ++i) out.velocity[static_cast<std::size_t>(i)] += w * v[static_cast<std::size_t>(i)];
  }
  if (total_weight == 0.0) {
    throw NodeError("all interpolation corners are at nodes", std::numeric_limits<double>::quiet_NaN(), q.positions);
  }
  for (double& v : out.velocity) v /= total_weight;
  return out;
}

GridFunction coordinate_chart(const GridSpec& grid, std::span<const int> origin, int coordinate) {
  const int centre = origin[static_cast<std::size_t>(coordinate)];
  const int n_sites = grid.n_sites();
  const double a = grid.spacing();
  return [centre, n_sites, a, coordinate](std::span<const int> t) {
    int d = (t[static_cast<std::size_t>(coordinate)] - centre) % n_sites;
    if (d < 0) d += n_sites;
    if (2 * d > n_sites) d -= n_sites;
    return a * (centre + d);
  };
}

double function_rate(const FockVector& psi, const OperatorBlocks& ops, std::span<const int> sites,
                     const GridFunction& f) {
  const auto& space = psi.space();
  const int n = static_cast<int>(sites.size());
  const std::size_t idx = space.encode(sites);
  const cplx value = psi.at(n, idx);
  if (!(space.weight(n) * std::norm(value) > node_floor(psi, n))) {
    throw NodeError("configuration " + describe(sites) + " is at a node");
  }
  const double f_here = f(sites);
  const SparseOperator& h0 = ops.h0_blocks[static_cast<std::size_t>(n)];
  std::vector<int> other(static_cast<std::size_t>(n));
  // Column idx of the Hermitian block holds conj(H(idx, j)).
  cplx commutator = 0.0;
  for (SparseOperator::InnerIterator it(h0, static_cast<Eigen::Index>(idx)); it; ++it) {
    const auto j = static_cast<std::size_t>(it.row());
    space.decode(n, j, other);
    commutator += std::conj(it.value()) * (f(other) - f_here) * psi.at(n, j);
  }
  const cplx x_psi = cplx(0.0, 1.0 / ops.hbar) * commutator;
  return std::real(std::conj(value) * x_psi) / std::norm(value);
}

double function_rate_pv(const FockVector& psi, const OperatorBlocks& ops, std::span<const int> sites,
                        const GridFunction& f) {
  const auto& space = psi.space();
  const int n = static_cast<int>(sites.size());
  const Eigen::VectorXcd u = psi.to_orthonormal();

  // f-hat on the whole space; f only matters inside sector n since H0 keeps n.
  Eigen::VectorXd f_diag = Eigen::VectorXd::Zero(u.size());
  std::vector<int> tuple(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < space.block_size(n); ++j) {
    space.decode(n, j, tuple);
    f_diag[static_cast<Eigen::Index>(space.offset(n) + j)] = f(tuple);
  }
  const Eigen::VectorXcd fu = f_diag.cwiseProduct(u);
  const Eigen::VectorXcd h0u = ops.h0 * u;
  const Eigen::VectorXcd xu =
      cplx(0.0, 1.0 / ops.hbar) * (Eigen::VectorXcd(ops.h0 * fu) - Eigen::VectorXcd(f_diag.cwiseProduct(h0u)));

  ConfigRegion point(space);
  point.insert(n, space.encode(sites));
  const Eigen::VectorXcd pu = pv_project(u, point);
  const double mass = std::real(pu.dot(u));
  if (!(mass > node_floor(psi, n))) throw NodeError("configuration " + describe(sites) + " is at a node");
  return std::real(pu.dot(xu)) / mass;
}

namespace {

VelocityEval commutator_velocity(const FockVector& psi, const OperatorBlocks& ops, const ModelSpec& spec,
                                 const Configuration& q, bool through_pv) {
  const auto sites = snap(spec.grid, q);
  const int n = static_cast<int>(sites.size());
  VelocityEval out{q, std::vector<double>(static_cast<std::size_t>(n), 0.0), n, 0.0};
  if (n == 0) return out;
  auto rate = [&](const GridFunction& f) {
    return through_pv ? function_rate_pv(psi, ops, sites, f) : function_rate(psi, ops, sites, f);
  };
  std::vector<GridFunction> charts;
  for (int i = 0; i < n; ++i) {
    charts.push_back(coordinate_chart(spec.grid, sites, i));
    out.velocity[static_cast<std::size_t>(i)] = rate(charts.back());
  }
  // Affine test function sum_i (i+1) x_i must move as v . grad f.
  const GridFunction affine = [&charts](std::span<const int> t) {
    double s = 0.0;
    for (std::size_t i = 0; i < charts.size(); ++i) s += static_cast<double>(i + 1) * charts[i](t);
    return s;
  };
  double expected = 0.0;
  for (int i = 0; i < n; ++i) expected += (i + 1) * out.velocity[static_cast<std::size_t>(i)];
  out.gradient_form_defect = std::abs(rate(affine) - expected);
  return out;
}

}  // namespace

VelocityEval velocity_commutator(const FockVector& psi, const OperatorBlocks& ops, const ModelSpec& spec,
                                 const Configuration& q) {
  return commutator_velocity(psi, ops, spec, q, false);
}

VelocityEval velocity_pv(const FockVector& psi, const OperatorBlocks& ops, const ModelSpec& spec,
                         const Configuration& q) {
  return commutator_velocity(psi, ops, spec, q, true);
}

double velocity_dirac(const Eigen::VectorXcd& spinor, const GridSpec& grid, double c, double x) {
  const int n = grid.n_sites();
  if (spinor.size() != 2 * n) throw ValidationError("spinor must have 2 components per site");
  const double floor = 1e-12 * spinor.squaredNorm() / n;
  const double u = grid.wrap_position(x) / grid.spacing();
  const double fl = std::floor(u);
  const double frac = u - fl;
  const int k0 = grid.wrap(static_cast<long>(fl));

  double v = 0.0;
  double weight = 0.0;
  for (int corner = 0; corner < 2; ++corner) {
    const double w = corner ? frac : 1.0 - frac;
    if (w == 0.0) continue;
    const int k = grid.wrap(k0 + corner);
    const cplx up = spinor[2 * k];
    const cplx down = spinor[2 * k + 1];
    const double rho = std::norm(up) + std::norm(down);
    if (!(rho > floor)) continue;
    v += w * c * 2.0 * std::real(std::conj(up) * down) / rho;
    weight += w;
  }
  if (weight == 0.0) throw NodeError("Dirac particle at a node", std::numeric_limits<double>::quiet_NaN(), {x});
  return v / weight;
}

Configuration flow_step(const FockVector& psi_start, const FockVector& psi_mid, const ModelSpec& spec,
                        const Configuration& q, double dt) {
  return flow_step(psi_start, node_floors(psi_start), psi_mid, node_floors(psi_mid), spec, q, dt);
}

Configuration flow_step(const FockVector& psi_start, std::span<const double> floors_start,
                        const FockVector& psi_mid, std::span<const double> floors_mid, const ModelSpec& spec,
                        const Configuration& q, double dt) {
  const auto& grid = spec.grid;
  const VelocityEval k1 = velocity_bohm(psi_start, spec, q, floors_start);
  Configuration mid = q;
  for (std::size_t i = 0; i < mid.positions.size(); ++i) {
    mid.positions[i] = grid.wrap_position(q.positions[i] + 0.5 * dt * k1.velocity[i]);
  }
  const VelocityEval k2 = velocity_bohm(psi_mid, spec, mid, floors_mid);
  Configuration next = q;
  for (std::size_t i = 0; i < next.positions.size(); ++i) {
    next.positions[i] = grid.wrap_position(q.positions[i] + dt * k2.velocity[i]);
  }
  return next;
}

PathSegment integrate_flow(const StateSeries& series, const ModelSpec& spec, const Configuration& q0, double t0,
                           double t1, double dt) {
  if (!(t1 > t0)) throw ValidationError("integrate_flow requires t0 < t1");
  if (!(dt > 0.0)) throw ValidationError("integrate_flow requires dt > 0");
  const double ratio = (t1 - t0) / dt;
  const long steps = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
    throw ValidationError("t1 - t0 must be a multiple of dt");
  }
  PathSegment path;
  path.times.push_back(t0);
  path.configurations.push_back(q0);
  Configuration q = q0;
  for (long j = 0; j < steps; ++j) {
    const double t = t0 + static_cast<double>(j) * dt;
    try {
      q = flow_step(series.at(t), series.at(t + 0.5 * dt), spec, q, dt);
    } catch (const NodeError& e) {
      throw NodeError(e.what(), t, q.positions);
    }
    path.times.push_back(t0 + static_cast<double>(j + 1) * dt);
    path.configurations.push_back(q);
  }
  return path;
}

std::vector<DiracSample> integrate_dirac_flow(const std::vector<Eigen::VectorXcd>& mesh, const GridSpec& grid,
                                              double c, double x0, double dt) {
  if (mesh.empty()) throw ValidationError("empty spinor mesh");
  const std::size_t steps = (mesh.size() - 1) / 2;
  std::vector<DiracSample> path;
  path.reserve(steps + 1);
  double x = grid.wrap_position(x0);
  for (std::size_t j = 0; j <= steps; ++j) {
    const double t = static_cast<double>(j) * dt;
    double v = 0.0;
    try {
      v = velocity_dirac(mesh[2 * j], grid, c, x);
    } catch (const NodeError& e) {
      throw NodeError(e.what(), t, {x});
    }
    path.push_back({t, x, v});
    if (j == steps) break;
    const double x_mid = grid.wrap_position(x + 0.5 * dt * v);
    const double v_mid = velocity_dirac(mesh[2 * j + 1], grid, c, x_mid);
    x = grid.wrap_position(x + dt * v_mid);
  }
  return path;
}

}  // namespace bellqft
