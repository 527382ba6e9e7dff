#include "bellqft/process.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <thread>

#include "bellqft/error.hpp"
#include "bellqft/flow.hpp"

namespace bellqft {

const char* to_string(ProcessMode mode) { return mode == ProcessMode::Lattice ? "lattice" : "continuum"; }

namespace {

long steps_for(double span, double dt) {
  const double r = span / dt;
  const long k = std::lround(r);
  if (std::abs(r - static_cast<double>(k)) > 1e-9 * std::max(1.0, r)) return -1;
  return k;
}

}  // namespace

void ProcessSettings::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("process.dt must be positive");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw ValidationError("process.t_final must be positive");
  if (steps_for(t_final, dt) < 0) throw ValidationError("t_final must be a multiple of process.dt");
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    const double t = sample_times[i];
    if (t < 0.0 || t > t_final * (1.0 + 1e-12) || steps_for(t, dt) < 0) {
      throw ValidationError("sample times must be multiples of process.dt within [0, t_final]");
    }
    if (i > 0 && !(t > sample_times[i - 1])) throw ValidationError("sample times must be increasing");
  }
  if (max_consecutive_freezes < 0) throw ValidationError("max_consecutive_freezes must be nonnegative");
}

ProcessContext::ProcessContext(ModelSpec spec, const StateSeries& mesh, ProcessSettings settings)
    : spec_(std::move(spec)),
      mesh_(&mesh),
      settings_(std::move(settings)),
      atoms_(spec_.space()),
      kernel_(spec_, atoms_) {
  settings_.validate();
  steps_ = static_cast<std::size_t>(steps_for(settings_.t_final, settings_.dt));
  if (mesh.size() < 2 * steps_ + 1) throw ValidationError("state mesh does not cover t_final");
  for (std::size_t j = 0; j <= 2 * steps_; ++j) {
    const double expected = 0.5 * settings_.dt * static_cast<double>(j);
    if (std::abs(mesh.time(j) - expected) > 1e-9 * std::max(1.0, expected)) {
      throw ValidationError("state mesh must be spaced dt/2 from t = 0");
    }
    floors_.push_back(node_floors(mesh.state(j)));
  }
}

StateSeries process_mesh(const FockVector& psi0, const OperatorBlocks& ops, const ProcessSettings& settings,
                         PropagationMethod method) {
  settings.validate();
  return evolve_mesh(psi0, ops, settings.t_final, 0.5 * settings.dt, method);
}

namespace {

Configuration apply_jump(const GridSpec& grid, const Configuration& q, const Destination& d, ProcessMode mode,
                         Rng& rng) {
  Configuration next = q;
  switch (d.kind) {
    case JumpKind::Creation:
      next.positions.push_back(grid.site_position(d.site));
      break;
    case JumpKind::Annihilation: {
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < q.positions.size(); ++i) {
        if (grid.nearest_site(q.positions[i]) == d.site) candidates.push_back(i);
      }
      const std::size_t pick = candidates.size() == 1 ? candidates.front() : candidates[rng.index(candidates.size())];
      next.positions.erase(next.positions.begin() + static_cast<long>(pick));
      break;
    }
    case JumpKind::Hop: {
      for (auto& x : next.positions) {
        if (grid.nearest_site(x) == d.from_site) {
          x = grid.site_position(d.site);
          break;
        }
      }
      break;
    }
  }
  if (mode == ProcessMode::Lattice) std::sort(next.positions.begin(), next.positions.end());
  return next;
}

}  // namespace

Trajectory run_trajectory(const ProcessContext& ctx, const Configuration& q0, Rng& rng, std::uint64_t seed) {
  const auto& settings = ctx.settings();
  const auto& grid = ctx.spec().grid;
  const bool lattice = settings.mode == ProcessMode::Lattice;

  Trajectory traj;
  traj.seed = seed;
  traj.mode = settings.mode;
  traj.sample_times = settings.sample_times;

  Configuration q = q0;
  if (lattice) {
    for (auto& x : q.positions) x = grid.site_position(grid.nearest_site(x));
    std::sort(q.positions.begin(), q.positions.end());
  }
  if (static_cast<int>(q.sector()) > ctx.spec().n_max) {
    traj.status = TrajectoryStatus::Failed;
    traj.failure = "initial configuration exceeds n_max";
    return traj;
  }

  std::size_t next_sample = 0;
  auto record = [&](std::size_t step_index) {
    while (next_sample < settings.sample_times.size() &&
           std::lround(settings.sample_times[next_sample] / settings.dt) == static_cast<long>(step_index)) {
      traj.samples.push_back(q);
      ++next_sample;
    }
  };
  record(0);

  RateKernelRow row;
  int consecutive_freezes = 0;
  const double dt = settings.dt;
  for (std::size_t j = 0; j < ctx.steps(); ++j) {
    const double t = static_cast<double>(j) * dt;
    bool frozen = false;
    try {
      if (!lattice && q.sector() > 0) {
        q = flow_step(ctx.half_step_state(2 * j), ctx.half_step_floors(2 * j), ctx.half_step_state(2 * j + 1),
                      ctx.half_step_floors(2 * j + 1), ctx.spec(), q, dt);
      }
      const int atom = ctx.atoms().id_of(q);
      fill_rates(ctx.half_step_state(2 * j + 1), ctx.half_step_floors(2 * j + 1), ctx.kernel(), atom, lattice, row);
      const auto jump = sample_jump(row, dt, rng);
      if (jump) {
        JumpEvent event{t + dt, jump->kind, q, {}};
        q = apply_jump(grid, q, *jump, settings.mode, rng);
        event.after = q;
        traj.events.push_back(std::move(event));
      }
    } catch (const NodeError&) {
      frozen = true;
    } catch (const StepSizeError& e) {
      traj.status = TrajectoryStatus::Failed;
      traj.failure = std::string(e.what()) + " at t = " + std::to_string(t);
      return traj;
    }

    if (frozen) {
      ++traj.node_freezes;
      if (++consecutive_freezes > settings.max_consecutive_freezes) {
        traj.status = TrajectoryStatus::Failed;
        traj.failure = "node freeze exceeded " + std::to_string(settings.max_consecutive_freezes) +
                       " consecutive steps at t = " + std::to_string(t);
        return traj;
      }
    } else {
      consecutive_freezes = 0;
    }
    record(j + 1);
  }
  return traj;
}

std::size_t EnsembleResult::failed_count() const {
  return static_cast<std::size_t>(
      std::count_if(trajectories.begin(), trajectories.end(), [](const Trajectory& t) { return !t.ok(); }));
}

std::vector<std::uint64_t> EnsembleResult::failed_seeds() const {
  std::vector<std::uint64_t> seeds;
  for (const auto& t : trajectories) {
    if (!t.ok()) seeds.push_back(t.seed);
  }
  return seeds;
}

EnsembleResult run_ensemble(const ProcessContext& ctx, std::size_t count, std::uint64_t root_seed,
                            unsigned parallelism) {
  if (count == 0) throw ValidationError("ensemble size must be at least 1");
  const ConfigurationSampler sampler(ctx.half_step_state(0), ctx.settings().jitter);

  EnsembleResult result;
  result.trajectories.resize(count);
  auto work = [&](std::size_t i) {
    const std::uint64_t seed = stream_seed(root_seed, i);
    Rng rng(seed);
    const Configuration q0 = sampler(rng);
    Trajectory traj = run_trajectory(ctx, q0, rng, seed);
    traj.index = i;
    result.trajectories[i] = std::move(traj);
  };

  unsigned workers = parallelism == 0 ? std::max(1u, std::thread::hardware_concurrency()) : parallelism;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return result;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) work(i);
    });
  }
  for (auto& th : pool) th.join();
  return result;
}

namespace {

nlohmann::json positions_json(const Configuration& q) { return q.positions; }

}  // namespace

nlohmann::json to_json(const Trajectory& trajectory) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : trajectory.events) {
    events.push_back({{"t", e.time},
                      {"kind", to_string(e.kind)},
                      {"before", positions_json(e.before)},
                      {"after", positions_json(e.after)}});
  }
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < trajectory.samples.size(); ++i) {
    samples.push_back({{"t", trajectory.sample_times[i]}, {"positions", positions_json(trajectory.samples[i])}});
  }
  nlohmann::json j{{"index", trajectory.index},
                   {"seed", trajectory.seed},
                   {"mode", to_string(trajectory.mode)},
                   {"status", trajectory.ok() ? "ok" : "failed"},
                   {"node_freezes", trajectory.node_freezes},
                   {"events", std::move(events)},
                   {"samples", std::move(samples)}};
  if (!trajectory.ok()) j["failure"] = trajectory.failure;
  return j;
}

void write_trajectories_jsonl(std::ostream& out, const EnsembleResult& ensemble, const nlohmann::json& header) {
  nlohmann::json head = header;
  head["schema_version"] = kTrajectorySchemaVersion;
  head["record"] = "header";
  out << head.dump() << '\n';
  for (const auto& t : ensemble.trajectories) out << to_json(t).dump() << '\n';
}

}  // namespace bellqft
