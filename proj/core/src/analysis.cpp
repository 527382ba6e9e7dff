#include "bellqft/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "bellqft/error.hpp"
#include "bellqft/flow.hpp"

namespace bellqft {

void Thresholds::validate() const {
  if (!(tv_max > 0.0 && tv_max <= 1.0)) throw ValidationError("analysis.tv_max must lie in (0, 1]");
  if (!(p_min >= 0.0 && p_min < 1.0)) throw ValidationError("analysis.p_min must lie in [0, 1)");
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("distributions differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

ChiSquareResult chi_square(std::span<const double> counts, std::span<const double> probabilities) {
  if (counts.size() != probabilities.size()) throw DimensionError("counts and probabilities differ in length");
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  ChiSquareResult out;
  if (total <= 0.0) return out;

  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probabilities[a] < probabilities[b]; });

  std::vector<std::pair<double, double>> bins;  // observed, expected
  double pool_obs = 0.0;
  double pool_exp = 0.0;
  int pool_members = 0;
  for (const std::size_t i : order) {
    const double expected = total * probabilities[i];
    if (expected >= 5.0 && pool_members == 0) {
      bins.emplace_back(counts[i], expected);
      continue;
    }
    pool_obs += counts[i];
    pool_exp += expected;
    ++pool_members;
    ++out.pooled_bins;
    if (pool_exp >= 5.0) {
      bins.emplace_back(pool_obs, pool_exp);
      pool_obs = pool_exp = 0.0;
      pool_members = 0;
    }
  }
  if (pool_members > 0) {
    if (bins.empty()) {
      bins.emplace_back(pool_obs, pool_exp);
    } else {
      bins.back().first += pool_obs;
      bins.back().second += pool_exp;
    }
  }

  out.bins = static_cast<int>(bins.size());
  out.dof = out.bins - 1;
  for (const auto& [obs, exp] : bins) {
    if (exp > 0.0) {
      out.statistic += (obs - exp) * (obs - exp) / exp;
    } else if (obs > 0.0) {
      out.statistic = std::numeric_limits<double>::infinity();
    }
  }
  if (out.dof <= 0) {
    out.p_value = 1.0;
  } else if (!std::isfinite(out.statistic)) {
    out.p_value = 0.0;
  } else {
    out.p_value = boost::math::gamma_q(0.5 * out.dof, 0.5 * out.statistic);
  }
  return out;
}

Binning Binning::atoms(const AtomTable& atoms) {
  Binning b;
  b.bin_count_ = atoms.size();
  b.map_.resize(atoms.size());
  b.bin_sector_.resize(atoms.size());
  for (std::size_t id = 0; id < atoms.size(); ++id) {
    b.map_[id] = static_cast<int>(id);
    b.bin_sector_[id] = atoms[id].sector;
  }
  return b;
}

Binning Binning::cells(const AtomTable& atoms, int cells) {
  const int n_sites = atoms.space().n_sites();
  if (cells < 1 || n_sites % cells != 0) throw ValidationError("cell count must divide n_sites");
  const int per_cell = n_sites / cells;
  Binning b;
  b.map_.resize(atoms.size());
  std::map<std::vector<int>, int> index;
  for (std::size_t id = 0; id < atoms.size(); ++id) {
    const Atom& atom = atoms[id];
    std::vector<int> key{atom.sector};
    for (const int s : atom.sites) key.push_back(s / per_cell);
    std::sort(key.begin() + 1, key.end());
    const auto [it, inserted] = index.emplace(key, static_cast<int>(b.bin_sector_.size()));
    if (inserted) b.bin_sector_.push_back(atom.sector);
    b.map_[id] = it->second;
  }
  b.bin_count_ = b.bin_sector_.size();
  return b;
}

std::vector<double> Binning::aggregate(std::span<const double> per_atom) const {
  if (per_atom.size() != map_.size()) throw DimensionError("per-atom vector has the wrong length");
  std::vector<double> out(bin_count_, 0.0);
  for (std::size_t id = 0; id < map_.size(); ++id) out[static_cast<std::size_t>(map_[id])] += per_atom[id];
  return out;
}

std::vector<double> atom_probabilities(const FockVector& psi, const AtomTable& atoms) {
  std::vector<double> p(atoms.size());
  const auto& space = psi.space();
  const double total = psi.norm_squared();
  for (std::size_t id = 0; id < atoms.size(); ++id) {
    const Atom& atom = atoms[id];
    p[id] = atom.multiplicity * space.weight(atom.sector) * std::norm(psi.at(atom)) / total;
  }
  return p;
}

EquivarianceReport equivariance_test(const EnsembleResult& ensemble, const StateSeries& series,
                                     const AtomTable& atoms, const Thresholds& thresholds, double dt,
                                     ProcessMode mode) {
  return equivariance_test(ensemble, series, atoms, Binning::atoms(atoms), thresholds, dt, mode);
}

EquivarianceReport equivariance_test(const EnsembleResult& ensemble, const StateSeries& series,
                                     const AtomTable& atoms, const Binning& binning,
                                     const Thresholds& thresholds, double dt, ProcessMode mode) {
  thresholds.validate();
  if (ensemble.trajectories.empty()) throw ValidationError("ensemble is empty");

  EquivarianceReport report;
  report.mode = mode;
  report.dt = dt;
  report.thresholds = thresholds;
  report.ensemble_size = ensemble.trajectories.size();
  report.failed_seeds = ensemble.failed_seeds();

  std::vector<const Trajectory*> used;
  for (const auto& t : ensemble.trajectories) {
    if (t.ok()) used.push_back(&t);
  }
  report.used = used.size();
  if (used.empty()) throw ValidationError("every trajectory in the ensemble failed");

  const auto& sample_times = used.front()->sample_times;
  const int sectors = atoms.space().sector_count();
  report.pass = true;
  for (std::size_t s = 0; s < sample_times.size(); ++s) {
    TimeReport tr;
    tr.t = sample_times[s];
    std::vector<double> counts(binning.bin_count(), 0.0);
    for (const Trajectory* traj : used) {
      if (traj->samples.size() != sample_times.size()) {
        throw ValidationError("trajectories disagree on their sample times");
      }
      const int id = atoms.id_of(traj->samples[s]);
      if (id < 0) throw ValidationError("sampled configuration exceeds n_max");
      counts[static_cast<std::size_t>(binning.bin_of(static_cast<std::size_t>(id)))] += 1.0;
    }
    tr.target = binning.aggregate(atom_probabilities(series.at(tr.t), atoms));
    tr.empirical = counts;
    for (auto& c : tr.empirical) c /= static_cast<double>(used.size());
    tr.tv = total_variation(tr.empirical, tr.target);
    tr.chi2 = chi_square(counts, tr.target);

    tr.sectors.resize(static_cast<std::size_t>(sectors));
    for (int n = 0; n < sectors; ++n) tr.sectors[static_cast<std::size_t>(n)].sector = n;
    for (std::size_t b = 0; b < binning.bin_count(); ++b) {
      auto& row = tr.sectors[static_cast<std::size_t>(binning.sector_of_bin(b))];
      row.empirical += tr.empirical[b];
      row.target += tr.target[b];
    }
    tr.pass = tr.tv <= thresholds.tv_max && tr.chi2.p_value >= thresholds.p_min;
    report.pass = report.pass && tr.pass;
    report.times.push_back(std::move(tr));
  }
  return report;
}

nlohmann::json EquivarianceReport::to_json() const {
  nlohmann::json times_json = nlohmann::json::array();
  for (const auto& tr : times) {
    nlohmann::json sectors_json = nlohmann::json::array();
    for (const auto& row : tr.sectors) {
      sectors_json.push_back({{"sector", row.sector}, {"empirical", row.empirical}, {"target", row.target}});
    }
    times_json.push_back({{"t", tr.t},
                          {"tv", tr.tv},
                          {"chi2", tr.chi2.statistic},
                          {"dof", tr.chi2.dof},
                          {"p_value", tr.chi2.p_value},
                          {"bins", tr.chi2.bins},
                          {"pooled_bins", tr.chi2.pooled_bins},
                          {"sectors", sectors_json},
                          {"pass", tr.pass}});
  }
  return {{"label", label},
          {"mode", to_string(mode)},
          {"dt", dt},
          {"ensemble_size", ensemble_size},
          {"used", used},
          {"failed", failed_seeds.size()},
          {"failed_seeds", failed_seeds},
          {"criteria", {{"tv_max", thresholds.tv_max}, {"p_min", thresholds.p_min}}},
          {"times", times_json},
          {"pass", pass}};
}

std::string EquivarianceReport::summary() const {
  std::ostringstream os;
  os << "equivariance" << (label.empty() ? "" : " [" + label + "]") << ": " << to_string(mode)
     << " mode, dt = " << dt << ", M = " << ensemble_size << " (" << failed_seeds.size() << " failed, excluded)\n";
  os << "  pass iff TV <= " << thresholds.tv_max << " and p >= " << thresholds.p_min << " at every time\n";
  for (const auto& tr : times) {
    os << "  t = " << tr.t << ": TV = " << tr.tv << ", chi2 = " << tr.chi2.statistic << " (dof " << tr.chi2.dof
       << ", " << tr.chi2.pooled_bins << " bins pooled), p = " << tr.chi2.p_value << (tr.pass ? "  ok" : "  FAIL")
       << '\n';
    for (const auto& row : tr.sectors) {
      os << "    sector " << row.sector << ": empirical " << row.empirical << ", target " << row.target << '\n';
    }
  }
  os << "  result: " << (pass ? "PASS" : "FAIL") << '\n';
  return os.str();
}

EnsembleResult direct_ensemble(const std::vector<FockVector>& laws, const std::vector<double>& sample_times,
                               std::size_t count, std::uint64_t root_seed) {
  if (laws.size() != sample_times.size()) throw ValidationError("one law per sample time is required");
  std::vector<ConfigurationSampler> samplers;
  for (const auto& psi : laws) samplers.emplace_back(psi);
  EnsembleResult out;
  out.trajectories.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& traj = out.trajectories[i];
    traj.index = i;
    traj.seed = stream_seed(root_seed, i);
    traj.sample_times = sample_times;
    Rng rng(traj.seed);
    for (const auto& sampler : samplers) traj.samples.push_back(sampler(rng));
  }
  return out;
}

GeneratorReport generator_identity_check(const FockVector& psi, const TransitionKernel& kernel,
                                         const OperatorBlocks& ops, double tolerance) {
  const auto& atoms = kernel.atoms();
  const SectorField rate = density_rate(psi, ops);
  const std::vector<double> rate_per_atom = rate.atom_sums(atoms);

  GeneratorReport report;
  report.tolerance = tolerance;
  report.sector_max_error.assign(static_cast<std::size_t>(psi.space().sector_count()), 0.0);
  for (std::size_t q = 0; q < atoms.size(); ++q) {
    double flux = 0.0;
    const int id = static_cast<int>(q);
    for (const auto& link : kernel.interaction_links(id)) flux += net_flux(psi, kernel, id, link.target);
    for (const auto& link : kernel.hop_links(id)) flux += net_flux(psi, kernel, id, link.target);
    const double err = std::abs(flux - rate_per_atom[q]);
    auto& sector_err = report.sector_max_error[static_cast<std::size_t>(atoms[q].sector)];
    sector_err = std::max(sector_err, err);
    if (report.worst_atom < 0 || err > report.max_error) {
      report.max_error = err;
      report.worst_atom = id;
    }
  }
  return report;
}

bool PvEquivalenceReport::passed() const {
  return std::all_of(items.begin(), items.end(), [](const EquivalenceItem& i) { return i.passed; });
}

nlohmann::json PvEquivalenceReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& i : items) {
    list.push_back({{"name", i.name},
                    {"max_error", i.max_error},
                    {"tolerance", i.tolerance},
                    {"worst_atom", i.worst_atom},
                    {"passed", i.passed},
                    {"detail", i.detail}});
  }
  return {{"configurations", configurations}, {"nodes", nodes}, {"items", list}, {"pass", passed()}};
}

namespace {

void record(EquivalenceItem& item, double err, int atom) {
  if (item.worst_atom < 0 || err > item.max_error) {
    item.max_error = err;
    item.worst_atom = atom;
  }
  if (!(err <= item.tolerance)) item.passed = false;
}

void node_mismatch(EquivalenceItem& item, int atom) {
  item.passed = false;
  item.worst_atom = atom;
  item.detail = "only one formulation reports a node at atom " + std::to_string(atom);
}

}  // namespace

PvEquivalenceReport pv_equivalence_check(const FockVector& psi, const ModelSpec& spec, const OperatorBlocks& ops,
                                         const TransitionKernel& kernel, std::span<const int> atom_ids) {
  const auto& atoms = kernel.atoms();
  std::vector<int> ids(atom_ids.begin(), atom_ids.end());
  if (ids.empty()) {
    ids.resize(atoms.size());
    std::iota(ids.begin(), ids.end(), 0);
  }

  PvEquivalenceReport report;
  EquivalenceItem velocity{"gradient velocity vs commutator velocity", 0.0, 1e-10, -1, true, ""};
  EquivalenceItem pv_rate{"commutator rate vs PV commutator rate", 0.0, 1e-12, -1, true, ""};
  EquivalenceItem jumps{"jump rates vs PV jump rates", 0.0, 1e-10, -1, true, ""};
  const GridSpec& grid = spec.grid;

  for (const int id : ids) {
    ++report.configurations;
    const Atom& atom = atoms[static_cast<std::size_t>(id)];
    const Configuration q = atoms.configuration(static_cast<std::size_t>(id));

    // Checks that need a non-node source; both sides must agree on nodes.
    bool node_a = false;
    bool node_b = false;
    std::vector<double> v_grad;
    VelocityEval v_comm;
    try {
      v_grad = grid_velocity(psi, spec, atom.sites);
    } catch (const NodeError&) {
      node_a = true;
    }
    try {
      v_comm = velocity_commutator(psi, ops, spec, q);
    } catch (const NodeError&) {
      node_b = true;
    }
    if (node_a != node_b && atom.sector > 0) {
      node_mismatch(velocity, id);
      continue;
    }
    if (node_a && atom.sector > 0) {
      ++report.nodes;
      try {
        (void)pv_rates(psi, ops, atoms, id, true);
        node_mismatch(jumps, id);
      } catch (const NodeError&) {
      }
      continue;
    }

    double err = 0.0;
    for (std::size_t i = 0; i < v_grad.size(); ++i) err = std::max(err, std::abs(v_grad[i] - v_comm.velocity[i]));
    record(velocity, err, id);

    if (atom.sector > 0) {
      double rate_err = 0.0;
      const auto chart = coordinate_chart(grid, atom.sites, 0);
      const GridFunction wave = [&grid](std::span<const int> t) {
        double s = 0.0;
        for (const int k : t) s += std::sin(2.0 * M_PI * grid.site_position(k) / grid.length());
        return s;
      };
      for (const auto* f : {&chart, &wave}) {
        const double a = function_rate(psi, ops, atom.sites, *f);
        const double b = function_rate_pv(psi, ops, atom.sites, *f);
        rate_err = std::max(rate_err, std::abs(a - b) / std::max(1.0, std::abs(a)));
      }
      record(pv_rate, rate_err, id);
    }

    RateKernelRow direct;
    RateKernelRow via_pv;
    try {
      direct = lattice_rates(psi, kernel, id);
      node_a = false;
    } catch (const NodeError&) {
      node_a = true;
    }
    try {
      via_pv = pv_rates(psi, ops, atoms, id, true);
      node_b = false;
    } catch (const NodeError&) {
      node_b = true;
    }
    if (node_a != node_b) {
      node_mismatch(jumps, id);
      continue;
    }
    if (node_a) {
      ++report.nodes;
      continue;
    }
    std::map<int, double> lhs;
    std::map<int, double> rhs;
    for (const auto& d : direct.destinations) lhs[d.atom] += d.rate;
    for (const auto& d : via_pv.destinations) rhs[d.atom] += d.rate;
    double jerr = 0.0;
    for (const auto& [target, r] : lhs) {
      const double other = rhs.count(target) ? rhs[target] : 0.0;
      jerr = std::max(jerr, std::abs(r - other) / std::max(1.0, r));
    }
    for (const auto& [target, r] : rhs) {
      if (!lhs.count(target)) jerr = std::max(jerr, std::abs(r) / std::max(1.0, r));
    }
    record(jumps, jerr, id);
  }
  report.items = {velocity, pv_rate, jumps};
  return report;
}

ChainLaw lattice_chain_law(const ProcessContext& ctx, std::span<const double> initial) {
  const auto& atoms = ctx.atoms();
  if (initial.size() != atoms.size()) throw DimensionError("initial law must have one entry per atom");
  const auto& settings = ctx.settings();
  const double dt = settings.dt;

  std::vector<double> p(initial.begin(), initial.end());
  std::vector<double> next(p.size());
  ChainLaw out;
  std::size_t next_sample = 0;
  auto record_law = [&](std::size_t step) {
    while (next_sample < settings.sample_times.size() &&
           std::lround(settings.sample_times[next_sample] / dt) == static_cast<long>(step)) {
      out.laws.push_back(p);
      ++next_sample;
    }
  };
  record_law(0);

  RateKernelRow row;
  for (std::size_t j = 0; j < ctx.steps(); ++j) {
    std::fill(next.begin(), next.end(), 0.0);
    const FockVector& psi = ctx.half_step_state(2 * j + 1);
    const auto floors = ctx.half_step_floors(2 * j + 1);
    for (std::size_t q = 0; q < atoms.size(); ++q) {
      if (p[q] == 0.0) continue;
      try {
        fill_rates(psi, floors, ctx.kernel(), static_cast<int>(q), true, row);
      } catch (const NodeError&) {
        next[q] += p[q];
        continue;
      }
      if (row.total_rate * dt > kJumpGuard) {
        out.failed_mass += p[q];
        continue;
      }
      next[q] += p[q] * (1.0 - row.total_rate * dt);
      for (const auto& d : row.destinations) next[static_cast<std::size_t>(d.atom)] += p[q] * d.rate * dt;
    }
    p.swap(next);
    record_law(j + 1);
  }
  return out;
}

}  // namespace bellqft
