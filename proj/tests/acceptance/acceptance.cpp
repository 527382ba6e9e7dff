// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bellqft/analysis.hpp"
#include "bellqft/error.hpp"
#include "bellqft/flow.hpp"
#include "bellqft/process.hpp"

using namespace bellqft;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

ModelSpec lattice_model() {
  ModelSpec spec{GridSpec(8.0, 8)};
  spec.n_max = 2;
  spec.coupling = 1.0;
  spec.form_factor.width = 2.0;
  return spec;
}

ModelSpec continuum_model(int n_sites) {
  ModelSpec spec{GridSpec(8.0, n_sites)};
  spec.n_max = 2;
  spec.coupling = 0.7;
  spec.form_factor.width = 2.0;
  return spec;
}

InitialStateSpec continuum_initial() {
  InitialStateSpec init;
  init.vacuum_amplitude = 1.0;
  init.packets.push_back({1, 3.0, 1.0, 1.0, 1.0});
  return init;
}

StateSeries evolve_at(const FockVector& psi0, const OperatorBlocks& ops, const std::vector<double>& times) {
  PropagatorPlan plan;
  plan.t_final = times.back();
  plan.sample_times = times;
  return evolve(psi0, ops, plan);
}

std::string sector_list(const FockVector& psi) {
  std::string s;
  for (int n = 0; n <= psi.space().n_max(); ++n) s += fmt("%s%.3f", n ? "/" : "", psi.sector_mass(n));
  return s;
}

Outcome generator_identity() {
  const ModelSpec spec = lattice_model();
  const OperatorBlocks ops = build_operators(spec);
  const AtomTable atoms(spec.space());
  const TransitionKernel kernel(spec, atoms);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    Rng rng(stream_seed(2024, i));
    const FockVector psi = random_state(spec.space(), rng);
    worst = std::max(worst, generator_identity_check(psi, kernel, ops, 1e-10).max_error);
  }
  return {worst <= 1e-10, fmt("dim %zu, 20 states, max |sum flux - drho/dt| = %.2e (tol 1e-10)",
                              spec.space().dimension(), worst)};
}

Outcome flux_antisymmetry() {
  const ModelSpec spec = lattice_model();
  const AtomTable atoms(spec.space());
  const TransitionKernel kernel(spec, atoms);
  Rng rng(77);
  const FockVector psi = random_state(spec.space(), rng);
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t src = 0; src < atoms.size(); ++src) {
    for (const auto& l : kernel.interaction_links(static_cast<int>(src))) pairs.emplace_back(l.target, int(src));
  }
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto [q, qp] = pairs[rng.index(pairs.size())];
    const double net = net_flux(psi, kernel, q, qp);
    worst = std::max(worst, std::abs(net - flux_element(psi, kernel, q, qp)));
    worst = std::max(worst, std::abs(net + net_flux(psi, kernel, qp, q)));
  }
  return {worst <= 1e-12, fmt("1000 random interaction pairs, max deviation %.2e (tol 1e-12)", worst)};
}

Outcome lattice_equivariance() {
  const ModelSpec spec = lattice_model();
  const OperatorBlocks ops = build_operators(spec);
  const FockVector vac = FockVector::vacuum(spec.space());
  ProcessSettings ps;
  ps.mode = ProcessMode::Lattice;
  ps.dt = 0.005;
  ps.t_final = 1.2;
  ps.sample_times = {0.8, 1.0, 1.2};
  const StateSeries mesh = process_mesh(vac, ops, ps);
  const ProcessContext ctx(spec, mesh, ps);
  const StateSeries series = evolve_at(vac, ops, ps.sample_times);

  const FockVector& last = series.state(series.size() - 1);
  bool masses_ok = true;
  for (int n = 0; n <= spec.n_max; ++n) masses_ok = masses_ok && last.sector_mass(n) >= 0.1;

  const EnsembleResult ensemble = run_ensemble(ctx, 10000, 7);
  const EquivarianceReport report =
      equivariance_test(ensemble, series, ctx.atoms(), Thresholds{}, ps.dt, ProcessMode::Lattice);

  const std::vector<FockVector> frozen(ps.sample_times.size(), vac);
  const EnsembleResult control = direct_ensemble(frozen, ps.sample_times, 10000, 7);
  const EquivarianceReport negative =
      equivariance_test(control, series, ctx.atoms(), Thresholds{}, ps.dt, ProcessMode::Lattice);

  std::string detail = fmt("sector masses at t_final %s; ", sector_list(last).c_str());
  for (const auto& t : report.times) detail += fmt("t=%.1f TV %.4f p %.3f; ", t.t, t.tv, t.chi2.p_value);
  detail += fmt("failed %zu; negative control %s (max TV %.3f)", ensemble.failed_count(),
                negative.pass ? "passed" : "failed", negative.times.front().tv);
  return {masses_ok && report.pass && ensemble.failed_count() == 0 && !negative.pass, detail};
}

Outcome continuum_equivariance() {
  const ModelSpec spec = continuum_model(16);
  const OperatorBlocks ops = build_operators(spec);
  const FockVector psi0 = build_initial_state(spec, continuum_initial());
  ProcessSettings ps;
  ps.mode = ProcessMode::Continuum;
  ps.dt = 0.005;
  ps.t_final = 1.0;
  ps.sample_times = {0.5, 0.75, 1.0};
  ps.jitter = true;
  const StateSeries mesh = process_mesh(psi0, ops, ps);
  const ProcessContext ctx(spec, mesh, ps);
  const StateSeries series = evolve_at(psi0, ops, ps.sample_times);
  const EnsembleResult ensemble = run_ensemble(ctx, 10000, 3);
  const Thresholds loose{0.08, 0.0};
  const EquivarianceReport report =
      equivariance_test(ensemble, series, ctx.atoms(), loose, ps.dt, ProcessMode::Continuum);
  double max_tv = 0.0;
  for (const auto& t : report.times) max_tv = std::max(max_tv, t.tv);
  std::string detail = fmt("N=16 M=1e4 max TV %.4f (tol 0.08), failed %zu; ", max_tv, ensemble.failed_count());
  const bool tv_ok = report.pass && ensemble.failed_count() < 100;

  // N doubling on the continuum ensemble, coarse cells.
  ConvergenceScenario scenario;
  scenario.model = continuum_model(8);
  scenario.initial = continuum_initial();
  scenario.t_final = 1.0;
  scenario.cells = 4;
  scenario.jitter = true;
  scenario.root_seed = 11;
  const auto n_rows = convergence_study(scenario, {{ProcessMode::Continuum, 8, 0.005, 40000},
                                                   {ProcessMode::Continuum, 16, 0.005, 40000},
                                                   {ProcessMode::Continuum, 32, 0.005, 40000}});
  bool n_monotone = true;
  detail += "N ladder TV";
  for (std::size_t i = 0; i < n_rows.size(); ++i) {
    detail += fmt(" %.4f", n_rows[i].tv);
    if (i > 0) n_monotone = n_monotone && n_rows[i].tv < n_rows[i - 1].tv;
  }

  // dt halving on the exact lattice chain law (no sampling noise).
  scenario.model = lattice_model();
  scenario.initial = InitialStateSpec{};
  scenario.t_final = 1.2;
  bool dt_monotone = true;
  detail += "; chain-law dt ladder TV";
  double previous = 0.0;
  for (double dt : {0.02, 0.01, 0.005, 0.0025}) {
    const ConvergenceRow row = run_convergence_case(scenario, {ProcessMode::Lattice, 8, dt, 1});
    detail += fmt(" %.5f", row.chain_tv);
    if (previous > 0.0) dt_monotone = dt_monotone && row.chain_tv < previous;
    previous = row.chain_tv;
  }

  // Continuum dt ladder, informational: its bias is below the sampling noise.
  scenario.model = continuum_model(16);
  scenario.initial = continuum_initial();
  scenario.t_final = 1.0;
  detail += "; continuum dt ladder TV (info)";
  for (double dt : {0.02, 0.01, 0.005}) {
    detail += fmt(" %.4f", run_convergence_case(scenario, {ProcessMode::Continuum, 16, dt, 10000}).tv);
  }
  return {tv_ok && n_monotone && dt_monotone, detail};
}

Outcome formulation_equivalences() {
  const ModelSpec spec = lattice_model();
  const OperatorBlocks ops = build_operators(spec);
  const AtomTable atoms(spec.space());
  const TransitionKernel kernel(spec, atoms);
  const FockVector vac = FockVector::vacuum(spec.space());
  const StateSeries series = evolve_at(vac, ops, {1.0});
  std::string detail;
  bool pass = true;
  std::vector<FockVector> states{series.state(0)};
  Rng rng(55);
  states.push_back(random_state(spec.space(), rng));
  for (const auto& psi : states) {
    const PvEquivalenceReport r = pv_equivalence_check(psi, spec, ops, kernel);
    pass = pass && r.passed();
    for (const auto& item : r.items) detail += fmt("%s %.1e; ", item.name.c_str(), item.max_error);
  }
  detail += fmt("%zu configurations per state", atoms.size());
  return {pass, detail};
}

Outcome dirac_bound() {
  ModelSpec spec{GridSpec(32.0, 64)};
  spec.mode = ModelMode::Dirac1p;
  spec.dirac.mass = 1.0;
  spec.dirac.c = 1.0;
  const double dt = 0.001;
  const int steps = 10000;
  SpinorStateSpec packet;
  packet.upper = 1.0;
  packet.lower = cplx(0.0, 1.0);
  packet.uniform = false;
  packet.center = 16.0;
  packet.width = 2.0;
  packet.momentum = 0.8;
  const SparseOperator h = build_dirac(spec);
  PropagatorPlan plan;
  plan.t_final = steps * dt;
  for (int j = 0; j <= 2 * steps; ++j) plan.sample_times.push_back(j * dt / 2.0);
  plan.sample_times.back() = plan.t_final;
  const auto mesh = evolve_vectors(h, spec.hbar, build_spinor_state(spec, packet), plan);
  const auto path = integrate_dirac_flow(mesh, spec.grid, spec.dirac.c, 15.0, dt);
  int violations = 0;
  double vmax = 0.0;
  for (const auto& s : path) {
    vmax = std::max(vmax, std::abs(s.v));
    if (std::abs(s.v) > spec.dirac.c * (1.0 + 1e-12)) ++violations;
  }

  // Massless alpha eigenstate.
  spec.dirac.mass = 0.0;
  SpinorStateSpec eigen;
  eigen.upper = 1.0;
  eigen.lower = 1.0;
  const Eigen::VectorXcd u = build_spinor_state(spec, eigen);
  double eigen_error = 0.0;
  for (int k = 0; k < 64; ++k) {
    eigen_error = std::max(eigen_error, std::abs(velocity_dirac(u, spec.grid, 1.0, 0.5 * k + 0.13) - 1.0));
  }

  // Real Schrodinger wavefunction: zero Bohm velocity everywhere on the grid.
  const ModelSpec boson = lattice_model();
  InitialStateSpec real_init;
  real_init.packets.push_back({1, 3.0, 1.0, 0.0, 1.0});
  real_init.packets.push_back({2, 5.0, 1.5, 0.0, 0.5});
  const FockVector real = build_initial_state(boson, real_init);
  const AtomTable atoms(boson.space());
  double real_v = 0.0;
  for (std::size_t id = 0; id < atoms.size(); ++id) {
    const VelocityEval v = velocity_bohm(real, boson, atoms.configuration(id));
    for (double c : v.velocity) real_v = std::max(real_v, std::abs(c));
  }
  const bool pass = path.size() == steps + 1 && violations == 0 && eigen_error <= 1e-12 && real_v == 0.0;
  return {pass, fmt("%zu path points, %d violations, max |v| %.6f c; alpha eigenstate |v - c| %.1e; real Psi max "
                    "|v| %.1e",
                    path.size(), violations, vmax, eigen_error, real_v)};
}

Outcome unitarity() {
  double drift = 0.0;
  std::string detail;
  {
    const ModelSpec spec = lattice_model();
    const OperatorBlocks ops = build_operators(spec);
    const FockVector vac = FockVector::vacuum(spec.space());
    const StateSeries mesh = evolve_mesh(vac, ops, 1.2, 0.0025);
    const double e0 = expectation(vac, ops.total);
    for (std::size_t i = 0; i < mesh.size(); ++i) {
      drift = std::max(drift, std::abs(mesh.state(i).norm() - 1.0));
      drift = std::max(drift, std::abs(expectation(mesh.state(i), ops.total) - e0));
    }
    detail += fmt("lattice run %zu states; ", mesh.size());
  }
  {
    const ModelSpec spec = continuum_model(16);
    const OperatorBlocks ops = build_operators(spec);
    const FockVector psi0 = build_initial_state(spec, continuum_initial());
    const double e0 = expectation(psi0, ops.total);
    for (auto method : {PropagationMethod::Eigendecomposition, PropagationMethod::CrankNicolson}) {
      const StateSeries mesh = evolve_mesh(psi0, ops, 1.0, 0.0025, method);
      for (std::size_t i = 0; i < mesh.size(); ++i) {
        drift = std::max(drift, std::abs(mesh.state(i).norm() - 1.0));
        drift = std::max(drift, std::abs(expectation(mesh.state(i), ops.total) - e0));
      }
    }
    detail += "continuum run, spectral and Crank-Nicolson; ";
  }
  detail += fmt("max norm/energy drift %.2e (tol 1e-9)", drift);
  return {drift <= 1e-9, detail};
}

std::string records(const EnsembleResult& e) {
  std::ostringstream out;
  write_trajectories_jsonl(out, e, nlohmann::json{{"created", "ignored"}});
  const std::string text = out.str();
  return text.substr(text.find('\n') + 1);
}

Outcome reproducibility() {
  bool pass = true;
  std::string detail;
  for (auto mode : {ProcessMode::Lattice, ProcessMode::Continuum}) {
    const ModelSpec spec = continuum_model(16);
    const OperatorBlocks ops = build_operators(spec);
    const FockVector psi0 = build_initial_state(spec, continuum_initial());
    ProcessSettings ps;
    ps.mode = mode;
    ps.dt = 0.005;
    ps.t_final = 1.0;
    ps.sample_times = {0.5, 1.0};
    ps.jitter = mode == ProcessMode::Continuum;
    const StateSeries mesh = process_mesh(psi0, ops, ps);
    const ProcessContext ctx(spec, mesh, ps);
    const std::string reference = records(run_ensemble(ctx, 2000, 5, 1));
    for (unsigned p : {2u, 4u, 8u}) pass = pass && records(run_ensemble(ctx, 2000, 5, p)) == reference;
    detail += fmt("%s: %zu bytes identical for parallelism 1/2/4/8; ", to_string(mode), reference.size());
  }
  return {pass, detail};
}

Outcome pv_structure() {
  const PvConsistencyReport r = verify_pv_consistency(GridSpec(8.0, 8), 2);
  std::string detail;
  for (const auto& c : r.checks) detail += fmt("%s %s (%.1e); ", c.name.c_str(), c.passed ? "ok" : "FAIL", c.max_error);
  return {r.passed(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"generator identity", generator_identity},
      {"flux antisymmetry", flux_antisymmetry},
      {"lattice equivariance ensemble", lattice_equivariance},
      {"continuum equivariance and convergence", continuum_equivariance},
      {"formulation equivalences", formulation_equivalences},
      {"Dirac speed bound", dirac_bound},
      {"unitarity and energy", unitarity},
      {"reproducibility across parallelism", reproducibility},
      {"PV structure", pv_structure},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu %s: %s [%.1fs] %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
