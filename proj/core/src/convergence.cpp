#include <iomanip>
#include <sstream>

#include "bellqft/analysis.hpp"
#include "bellqft/error.hpp"

namespace bellqft {

ConvergenceRow run_convergence_case(const ConvergenceScenario& scenario, const ConvergenceCase& setting) {
  ModelSpec spec = scenario.model;
  spec.grid = GridSpec(scenario.model.grid.length(), setting.n_sites);
  spec.validate();
  const OperatorBlocks ops = build_operators(spec);
  const FockVector psi0 = build_initial_state(spec, scenario.initial);

  ProcessSettings settings;
  settings.mode = setting.mode;
  settings.dt = setting.dt;
  settings.t_final = scenario.t_final;
  settings.sample_times = {scenario.t_final};
  settings.jitter = scenario.jitter && setting.mode == ProcessMode::Continuum;
  const StateSeries mesh = process_mesh(psi0, ops, settings);
  const ProcessContext ctx(spec, mesh, settings);
  const auto& atoms = ctx.atoms();
  const Binning bins = Binning::cells(atoms, scenario.cells);

  const EnsembleResult ensemble = run_ensemble(ctx, setting.trajectories, scenario.root_seed, scenario.parallelism);
  const auto target_atoms = atom_probabilities(mesh.state(mesh.size() - 1), atoms);
  const auto target = bins.aggregate(target_atoms);

  ConvergenceRow row;
  row.setting = setting;
  row.failed = ensemble.failed_count();
  std::vector<double> empirical(bins.bin_count(), 0.0);
  const std::size_t used = ensemble.trajectories.size() - row.failed;
  if (used == 0) throw ValidationError("every trajectory in the convergence case failed");
  for (const auto& traj : ensemble.trajectories) {
    if (!traj.ok()) continue;
    const int id = atoms.id_of(traj.samples.back());
    empirical[static_cast<std::size_t>(bins.bin_of(static_cast<std::size_t>(id)))] += 1.0 / static_cast<double>(used);
  }
  row.tv = total_variation(empirical, target);

  const int sectors = spec.n_max + 1;
  row.sector_empirical.assign(static_cast<std::size_t>(sectors), 0.0);
  row.sector_target.assign(static_cast<std::size_t>(sectors), 0.0);
  for (std::size_t b = 0; b < bins.bin_count(); ++b) {
    const auto n = static_cast<std::size_t>(bins.sector_of_bin(b));
    row.sector_empirical[n] += empirical[b];
    row.sector_target[n] += target[b];
  }
  row.sector_tv = total_variation(row.sector_empirical, row.sector_target);

  if (setting.mode == ProcessMode::Lattice) {
    const auto law = lattice_chain_law(ctx, atom_probabilities(psi0, atoms));
    row.chain_tv = total_variation(bins.aggregate(law.laws.back()), target);
  }
  return row;
}

std::vector<ConvergenceRow> convergence_study(const ConvergenceScenario& scenario,
                                              const std::vector<ConvergenceCase>& ladder) {
  std::vector<ConvergenceRow> rows;
  rows.reserve(ladder.size());
  for (const auto& setting : ladder) rows.push_back(run_convergence_case(scenario, setting));
  return rows;
}

std::string format_convergence_table(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "mode" << std::setw(6) << "N" << std::setw(10) << "dt" << std::setw(8) << "M"
     << std::setw(12) << "TV" << std::setw(12) << "sector TV" << std::setw(12) << "chain TV"
     << "failed\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(10) << to_string(r.setting.mode) << std::setw(6) << r.setting.n_sites
       << std::setw(10) << r.setting.dt << std::setw(8) << r.setting.trajectories << std::setw(12) << r.tv
       << std::setw(12) << r.sector_tv << std::setw(12);
    if (r.chain_tv >= 0.0) {
      os << r.chain_tv;
    } else {
      os << "-";
    }
    os << r.failed << '\n';
  }
  return os.str();
}

}  // namespace bellqft
