#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bellqft/analysis.hpp"
#include "bellqft/error.hpp"
#include "bellqft/flow.hpp"
#include "bellqft/fock_json.hpp"
#include "bellqft/jumps.hpp"

namespace bellqft::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output.directory);
  std::ofstream out(cfg.output.directory / name);
  if (!out) throw Error("cannot write " + (cfg.output.directory / name).string());
  out << std::setprecision(17);
  return out;
}

void write_json(const RunConfig& cfg, const std::string& name, const json& j) {
  auto out = open_output(cfg, name);
  out << j.dump(2) << '\n';
}

void require_fock_mode(const RunConfig& cfg, const char* command) {
  if (cfg.model.mode != ModelMode::SchrodingerFock) {
    throw ValidationError(std::string(command) + " needs model.mode \"schrodinger_fock\"");
  }
}

std::string sites_text(const Atom& atom) {
  std::string s;
  for (const int k : atom.sites) {
    if (!s.empty()) s += ' ';
    s += std::to_string(k);
  }
  return s;
}

FockVector state_at(const RunConfig& cfg, const OperatorBlocks& ops, const FockVector& psi0, double t) {
  if (t == 0.0) return psi0;
  PropagatorPlan plan = cfg.propagator;
  plan.t_final = t;
  plan.sample_times = {t};
  return evolve(psi0, ops, plan).state(0);
}

void write_histograms(const RunConfig& cfg, const EquivarianceReport& report, const AtomTable& atoms) {
  auto out = open_output(cfg, "histograms.csv");
  out << "# config_hash=" << cfg.hash << '\n';
  out << "t,atom,sites,empirical,target\n";
  for (const auto& tr : report.times) {
    for (std::size_t id = 0; id < atoms.size(); ++id) {
      out << tr.t << ',' << id << ',' << sites_text(atoms[id]) << ',' << tr.empirical[id] << ',' << tr.target[id]
          << '\n';
    }
  }
}

}  // namespace

Configuration parse_configuration(const std::string& text) {
  Configuration q;
  std::string trimmed;
  for (const char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) trimmed += c;
  }
  if (trimmed.empty() || trimmed == "vacuum") return q;
  std::stringstream ss(trimmed);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(x)) {
      throw ValidationError("malformed configuration '" + text + "': expected comma-separated positions");
    }
    q.positions.push_back(x);
  }
  if (!trimmed.empty() && trimmed.back() == ',') {
    throw ValidationError("malformed configuration '" + text + "': trailing comma");
  }
  return q;
}

int cmd_evolve(const RunConfig& cfg, std::ostream& log) {
  require_fock_mode(cfg, "evolve");
  const OperatorBlocks ops = build_operators(cfg.model);
  const FockVector psi0 = build_initial_state(cfg.model, cfg.initial);
  const StateSeries series = evolve(psi0, ops, cfg.propagator);
  const double e0 = expectation(psi0, ops.total);

  if (cfg.output.wants("json")) {
    for (std::size_t i = 0; i < series.size(); ++i) {
      json snap{{"config_hash", cfg.hash}, {"t", series.time(i)}, {"state", to_json(series.state(i))}};
      std::ostringstream name;
      name << "psi_" << std::setw(4) << std::setfill('0') << i << ".json";
      write_json(cfg, name.str(), snap);
    }
  }
  double drift = 0.0;
  std::ostringstream table;
  table << std::setprecision(17);
  table << "# config_hash=" << cfg.hash << '\n' << "t,norm,energy";
  for (int n = 0; n <= cfg.model.n_max; ++n) table << ",mass_" << n;
  table << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& psi = series.state(i);
    const double energy = expectation(psi, ops.total);
    drift = std::max({drift, std::abs(psi.norm() - 1.0), std::abs(energy - e0)});
    table << series.time(i) << ',' << psi.norm() << ',' << energy;
    for (int n = 0; n <= cfg.model.n_max; ++n) table << ',' << psi.sector_mass(n);
    table << '\n';
  }
  if (cfg.output.wants("csv")) open_output(cfg, "norms.csv") << table.str();
  log << "evolve: " << series.size() << " snapshots in " << cfg.output.directory.string()
      << ", max norm/energy drift " << drift << '\n';
  return kSuccess;
}

int cmd_simulate(const RunConfig& cfg, unsigned parallelism, std::ostream& log) {
  require_fock_mode(cfg, "simulate");
  const OperatorBlocks ops = build_operators(cfg.model);
  const FockVector psi0 = build_initial_state(cfg.model, cfg.initial);
  const ProcessSettings settings = cfg.process_settings();
  const StateSeries mesh = process_mesh(psi0, ops, settings, cfg.propagator.method);
  const ProcessContext ctx(cfg.model, mesh, settings);
  const EnsembleResult ensemble = run_ensemble(ctx, cfg.process.trajectories, cfg.process.root_seed, parallelism);

  if (cfg.output.wants("jsonl")) {
    auto out = open_output(cfg, "trajectories.jsonl");
    json header{{"config_hash", cfg.hash},
                {"created", utc_timestamp()},
                {"command", "simulate"},
                {"mode", to_string(settings.mode)},
                {"dt", settings.dt},
                {"trajectories", cfg.process.trajectories},
                {"root_seed", cfg.process.root_seed}};
    write_trajectories_jsonl(out, ensemble, header);
  }

  EquivarianceReport report =
      equivariance_test(ensemble, mesh, ctx.atoms(), cfg.analysis.thresholds, settings.dt, settings.mode);
  report.label = "simulate";
  if (cfg.output.wants("csv")) write_histograms(cfg, report, ctx.atoms());

  std::size_t events = 0;
  for (const auto& t : ensemble.trajectories) events += t.events.size();
  const double failed_fraction =
      static_cast<double>(ensemble.failed_count()) / static_cast<double>(ensemble.trajectories.size());
  json summary = report.to_json();
  summary["config_hash"] = cfg.hash;
  summary["events"] = events;
  summary["failed_fraction"] = failed_fraction;
  json failures = json::array();
  for (const auto& t : ensemble.trajectories) {
    if (!t.ok()) failures.push_back({{"index", t.index}, {"seed", t.seed}, {"reason", t.failure}});
  }
  summary["failures"] = failures;
  if (cfg.output.wants("json")) write_json(cfg, "summary.json", summary);
  std::ostringstream text;
  text << "config " << cfg.hash << ", " << events << " jump events\n" << report.summary();
  open_output(cfg, "summary.txt") << text.str();
  log << text.str();

  if (failed_fraction >= 0.01) {
    log << "simulate: " << ensemble.failed_count() << " of " << ensemble.trajectories.size()
        << " trajectories failed (>= 1%)\n";
    return kVerificationFailed;
  }
  return kSuccess;
}

int cmd_verify(const RunConfig& cfg, unsigned parallelism, std::ostream& log) {
  require_fock_mode(cfg, "verify");
  const ModelSpec& spec = cfg.model;
  const OperatorBlocks ops = build_operators(spec);
  const FockVector psi0 = build_initial_state(spec, cfg.initial);
  const AtomTable atoms(spec.space());
  const TransitionKernel kernel(spec, atoms);
  const ProcessSettings settings = cfg.process_settings();
  const StateSeries mesh = process_mesh(psi0, ops, settings, cfg.propagator.method);

  json report{{"config_hash", cfg.hash}};
  std::ostringstream text;
  text << "verify, config " << cfg.hash << '\n';
  bool pass = true;

  // Generator identity on seeded random states and on the evolved states.
  double identity_error = 0.0;
  int identity_worst = -1;
  for (int i = 0; i < cfg.analysis.identity_states; ++i) {
    Rng rng(stream_seed(cfg.process.root_seed ^ 0x5eedULL, static_cast<std::uint64_t>(i)));
    const auto r = generator_identity_check(random_state(spec.space(), rng), kernel, ops);
    if (r.max_error > identity_error || identity_worst < 0) {
      identity_error = std::max(identity_error, r.max_error);
      identity_worst = r.worst_atom;
    }
  }
  for (const double t : settings.sample_times) {
    const auto r = generator_identity_check(mesh.at(t), kernel, ops);
    identity_error = std::max(identity_error, r.max_error);
  }
  const bool identity_ok = identity_error <= 1e-10;
  pass = pass && identity_ok;
  report["generator_identity"] = {{"max_error", identity_error}, {"tolerance", 1e-10}, {"pass", identity_ok}};
  text << "generator identity: max error " << identity_error << (identity_ok ? "  ok" : "  FAIL") << '\n';

  const auto pv = pv_equivalence_check(mesh.at(settings.t_final), spec, ops, kernel);
  pass = pass && pv.passed();
  report["pv_equivalence"] = pv.to_json();
  for (const auto& item : pv.items) {
    text << item.name << ": max error " << item.max_error << " (tolerance " << item.tolerance << ")"
         << (item.passed ? "  ok" : "  FAIL") << (item.detail.empty() ? "" : "  " + item.detail) << '\n';
  }

  if (spec.space().dimension() <= 5000) {
    const auto structure = verify_pv_consistency(spec.grid, spec.n_max);
    json checks = json::array();
    for (const auto& c : structure.checks) {
      checks.push_back({{"name", c.name}, {"max_error", c.max_error}, {"passed", c.passed}, {"detail", c.detail}});
      text << "pv structure " << c.name << ": " << c.max_error << (c.passed ? "  ok" : "  FAIL") << '\n';
    }
    report["pv_structure"] = {{"checks", checks}, {"pass", structure.passed()}};
    pass = pass && structure.passed();
  } else {
    report["pv_structure"] = {{"skipped", "dimension above 5000"}};
    text << "pv structure: skipped (dimension above 5000)\n";
  }

  const ProcessContext ctx(spec, mesh, settings);
  EnsembleResult ensemble;
  std::string label = "dynamics";
  if (cfg.analysis.negative_control) {
    // Frozen |Psi_0|^2 at every sample time: must be rejected when Psi moves.
    std::vector<FockVector> laws(settings.sample_times.size(), psi0);
    ensemble = direct_ensemble(laws, settings.sample_times, cfg.process.trajectories, cfg.process.root_seed);
    label = "negative control (frozen initial law)";
  } else {
    ensemble = run_ensemble(ctx, cfg.process.trajectories, cfg.process.root_seed, parallelism);
  }
  EquivarianceReport eq =
      equivariance_test(ensemble, mesh, atoms, cfg.analysis.thresholds, settings.dt, settings.mode);
  eq.label = label;
  report["equivariance"] = eq.to_json();
  text << eq.summary();
  pass = pass && eq.pass;

  report["pass"] = pass;
  text << "verify: " << (pass ? "PASS" : "FAIL") << '\n';
  if (cfg.output.wants("json")) write_json(cfg, "verify_report.json", report);
  open_output(cfg, "verify_report.txt") << text.str();
  log << text.str();
  return pass ? kSuccess : kVerificationFailed;
}

int cmd_rates(const RunConfig& cfg, double t, const Configuration& q, std::ostream& out) {
  require_fock_mode(cfg, "rates");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("--time must be nonnegative");
  const ModelSpec& spec = cfg.model;
  const OperatorBlocks ops = build_operators(spec);
  const FockVector psi = state_at(cfg, ops, build_initial_state(spec, cfg.initial), t);
  const AtomTable atoms(spec.space());
  const TransitionKernel kernel(spec, atoms);
  const int id = atoms.id_of(q);
  if (id < 0) throw ValidationError("configuration has more than n_max particles");

  json j{{"config_hash", cfg.hash},
         {"t", t},
         {"mode", to_string(cfg.process.mode)},
         {"configuration", q.positions},
         {"source_atom", id},
         {"source_sites", atoms[static_cast<std::size_t>(id)].sites}};
  try {
    const RateKernelRow row = cfg.process.mode == ProcessMode::Lattice ? lattice_rates(psi, kernel, id)
                                                                        : jump_rates(psi, kernel, id);
    json dest = json::array();
    for (const auto& d : row.destinations) {
      json e{{"kind", to_string(d.kind)},
             {"site", d.site},
             {"atom", d.atom},
             {"sites", atoms[static_cast<std::size_t>(d.atom)].sites},
             {"rate", d.rate}};
      if (d.kind == JumpKind::Hop) e["from_site"] = d.from_site;
      dest.push_back(std::move(e));
    }
    j["node"] = false;
    j["total_rate"] = row.total_rate;
    j["destinations"] = dest;
  } catch (const NodeError&) {
    j["node"] = true;
    j["total_rate"] = nullptr;
    j["destinations"] = json::array();
  }
  out << std::setw(2) << j << '\n';
  return kSuccess;
}

int cmd_dirac_demo(const RunConfig& cfg, std::ostream& log) {
  const ModelSpec& spec = cfg.model;
  if (spec.mode != ModelMode::Dirac1p) throw ValidationError("dirac-demo needs model.mode \"dirac_1p\"");
  DiracInitial init;
  init.spinor.center = spec.grid.length() / 2.0;
  init.x0 = init.spinor.center;
  if (cfg.dirac_initial) init = *cfg.dirac_initial;

  const Eigen::VectorXcd u0 = build_spinor_state(spec, init.spinor);
  const SparseOperator h = build_dirac(spec);
  const double dt = cfg.propagator.dt_psi;
  const double t_final = cfg.propagator.t_final;
  const long steps = std::lround(t_final / dt);
  if (steps < 1 || std::abs(static_cast<double>(steps) * dt - t_final) > 1e-9 * t_final) {
    throw ValidationError("propagator.t_final must be a multiple of propagator.dt_psi");
  }
  PropagatorPlan plan;
  plan.method = cfg.propagator.method;
  plan.dt_psi = 0.5 * dt;
  plan.t_final = t_final;
  for (long j = 0; j <= 2 * steps; ++j) plan.sample_times.push_back(0.5 * dt * static_cast<double>(j));
  plan.sample_times.back() = t_final;
  const auto mesh = evolve_vectors(h, spec.hbar, u0, plan);
  const auto path = integrate_dirac_flow(mesh, spec.grid, spec.dirac.c, init.x0, dt);

  double vmax = 0.0;
  std::size_t violations = 0;
  auto out = open_output(cfg, "dirac_path.csv");
  out << "# config_hash=" << cfg.hash << '\n' << "t,x,v\n";
  for (const auto& s : path) {
    out << s.t << ',' << s.x << ',' << s.v << '\n';
    vmax = std::max(vmax, std::abs(s.v));
    if (std::abs(s.v) > spec.dirac.c * (1.0 + 1e-12)) ++violations;
  }
  log << "dirac-demo: " << path.size() << " samples, max |v| = " << vmax << " (c = " << spec.dirac.c << "), "
      << violations << " violations\n";
  return violations == 0 ? kSuccess : kVerificationFailed;
}

}  // namespace bellqft::cli
