#include <doctest.h>

#include <memory>
#include <sstream>

#include "bellqft/error.hpp"
#include "bellqft/process.hpp"
#include "support.hpp"

using namespace bellqft;

namespace {

struct Setup {
  Setup(const ModelSpec& spec, const FockVector& psi0, ProcessSettings settings)
      : ops(build_operators(spec)),
        mesh(process_mesh(psi0, ops, settings)),
        ctx(std::make_unique<ProcessContext>(spec, mesh, settings)) {}

  OperatorBlocks ops;
  StateSeries mesh;
  std::unique_ptr<ProcessContext> ctx;
};

ProcessSettings settings(ProcessMode mode, double dt = 0.01, double t_final = 1.0) {
  ProcessSettings s;
  s.mode = mode;
  s.dt = dt;
  s.t_final = t_final;
  s.sample_times = {0.5 * t_final, t_final};
  return s;
}

FockVector packet_state(const ModelSpec& spec) {
  InitialStateSpec init;
  init.vacuum_amplitude = 1.0;
  init.packets.push_back({1, 3.0, 1.0, 1.0, 1.0});
  return build_initial_state(spec, init);
}

std::string jsonl(const EnsembleResult& e) {
  std::ostringstream out;
  write_trajectories_jsonl(out, e, nlohmann::json{{"config_hash", "test"}});
  const std::string text = out.str();
  return text.substr(text.find('\n') + 1);
}

}  // namespace

TEST_CASE("settings validation") {
  ProcessSettings s = settings(ProcessMode::Lattice);
  CHECK_NOTHROW(s.validate());
  s.dt = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = settings(ProcessMode::Lattice);
  s.sample_times = {0.505};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = settings(ProcessMode::Lattice);
  s.sample_times = {2.0};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = settings(ProcessMode::Lattice);
  s.max_consecutive_freezes = -1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("context rejects a mesh that does not match the step") {
  const ModelSpec spec = test::small_model(6, 1, 0.5, 6.0);
  const OperatorBlocks ops = build_operators(spec);
  const FockVector vac = FockVector::vacuum(spec.space());
  const StateSeries wrong = evolve_mesh(vac, ops, 1.0, 0.01);
  CHECK_THROWS_AS(ProcessContext(spec, wrong, settings(ProcessMode::Lattice, 0.01)), ValidationError);
}

TEST_CASE("stationary vacuum without coupling never jumps") {
  const ModelSpec spec = test::small_model(8, 2, 0.0);
  const Setup s(spec, FockVector::vacuum(spec.space()), settings(ProcessMode::Continuum));
  const EnsembleResult e = run_ensemble(*s.ctx, 50, 1, 2);
  for (const auto& t : e.trajectories) {
    CHECK(t.ok());
    CHECK(t.events.empty());
    for (const auto& q : t.samples) CHECK(q.sector() == 0);
  }
}

TEST_CASE("coupled vacuum creates particles and sectors change by one at events") {
  const ModelSpec spec = test::small_model(8, 2, 1.0);
  for (auto mode : {ProcessMode::Lattice, ProcessMode::Continuum}) {
    const Setup s(spec, FockVector::vacuum(spec.space()), settings(mode, 0.005, 1.0));
    const EnsembleResult e = run_ensemble(*s.ctx, 200, 5, 2);
    std::size_t creations = 0;
    for (const auto& t : e.trajectories) {
      for (const auto& ev : t.events) {
        const auto before = static_cast<int>(ev.before.sector());
        const auto after = static_cast<int>(ev.after.sector());
        CHECK(after <= spec.n_max);
        if (ev.kind == JumpKind::Creation) {
          CHECK(after == before + 1);
          ++creations;
        } else if (ev.kind == JumpKind::Annihilation) {
          CHECK(after == before - 1);
        } else {
          CHECK(mode == ProcessMode::Lattice);
          CHECK(after == before);
        }
      }
      for (const auto& q : t.samples) CHECK(static_cast<int>(q.sector()) <= spec.n_max);
    }
    CHECK(creations > 0);
  }
}

TEST_CASE("lattice positions stay on sites and continuum positions stay in the box") {
  const ModelSpec spec = test::small_model(8, 2, 1.0, 4.0);
  const FockVector psi0 = packet_state(spec);
  {
    const Setup s(spec, psi0, settings(ProcessMode::Lattice, 0.005));
    for (const auto& t : run_ensemble(*s.ctx, 100, 3, 2).trajectories) {
      for (const auto& q : t.samples) {
        for (double x : q.positions) {
          const double u = x / spec.grid.spacing();
          CHECK(std::abs(u - std::round(u)) < 1e-12);
        }
      }
    }
  }
  const Setup s(spec, psi0, settings(ProcessMode::Continuum, 0.005));
  for (const auto& t : run_ensemble(*s.ctx, 100, 3, 2).trajectories) {
    for (const auto& q : t.samples) {
      for (double x : q.positions) {
        CHECK(x >= 0.0);
        CHECK(x < spec.grid.length());
      }
    }
  }
}

TEST_CASE("free continuum particles move continuously with no events") {
  const ModelSpec spec = test::small_model(16, 1, 0.0, 8.0);
  InitialStateSpec init;
  init.vacuum_amplitude = 0.0;
  init.packets.push_back({1, 4.0, 1.0, 0.7, 1.0});
  const FockVector psi0 = build_initial_state(spec, init);
  ProcessSettings ps = settings(ProcessMode::Continuum, 0.01, 0.2);
  ps.sample_times = {};
  for (int j = 1; j <= 20; ++j) ps.sample_times.push_back(j * 0.01);
  ps.sample_times.back() = 0.2;
  const Setup s(spec, psi0, ps);
  for (const auto& t : run_ensemble(*s.ctx, 50, 8, 1).trajectories) {
    CHECK(t.ok());
    CHECK(t.events.empty());
    for (std::size_t i = 1; i < t.samples.size(); ++i) {
      REQUIRE(t.samples[i].sector() == 1);
      const double step = spec.grid.displacement(t.samples[i - 1].positions[0], t.samples[i].positions[0]);
      CHECK(std::abs(step) < 0.05);
    }
  }
}

TEST_CASE("ensembles are reproducible and independent of parallelism") {
  const ModelSpec spec = test::small_model(8, 2, 1.0);
  const FockVector psi0 = packet_state(spec);
  for (auto mode : {ProcessMode::Lattice, ProcessMode::Continuum}) {
    const Setup s(spec, psi0, settings(mode, 0.01));
    const EnsembleResult serial = run_ensemble(*s.ctx, 64, 42, 1);
    const EnsembleResult parallel = run_ensemble(*s.ctx, 64, 42, 4);
    CHECK(serial.trajectories == parallel.trajectories);
    CHECK(jsonl(serial) == jsonl(parallel));
    const EnsembleResult other = run_ensemble(*s.ctx, 64, 43, 4);
    CHECK_FALSE(other.trajectories == serial.trajectories);

    for (std::size_t i : {0u, 17u}) {
      const std::uint64_t seed = stream_seed(42, i);
      CHECK(serial.trajectories[i].seed == seed);
      CHECK(serial.trajectories[i].index == i);
    }
    const EnsembleResult single = run_ensemble(*s.ctx, 1, 42, 1);
    CHECK(single.trajectories[0] == serial.trajectories[0]);
  }
}

TEST_CASE("run_trajectory starts from the given configuration") {
  const ModelSpec spec = test::small_model(8, 2, 1.0);
  const Setup s(spec, FockVector::vacuum(spec.space()), settings(ProcessMode::Continuum, 0.01));
  Rng a(9);
  Rng b(9);
  const Trajectory t1 = run_trajectory(*s.ctx, Configuration{}, a, 9);
  const Trajectory t2 = run_trajectory(*s.ctx, Configuration{}, b, 9);
  CHECK(t1 == t2);
  CHECK(t1.seed == 9);
  CHECK(t1.sample_times == std::vector<double>{0.5, 1.0});
  CHECK(t1.samples.size() == 2);
}

TEST_CASE("guard violations are recorded as failed trajectories") {
  const ModelSpec spec = test::small_model(8, 2, 40.0);
  const Setup s(spec, packet_state(spec), settings(ProcessMode::Lattice, 0.05));
  const EnsembleResult e = run_ensemble(*s.ctx, 20, 1, 2);
  CHECK(e.failed_count() > 0);
  CHECK(e.failed_seeds().size() == e.failed_count());
  for (const auto& t : e.trajectories) {
    if (!t.ok()) CHECK(t.failure.find("0.1") != std::string::npos);
  }
}

TEST_CASE("trajectory JSON carries the schema fields") {
  const ModelSpec spec = test::small_model(8, 2, 1.0);
  const Setup s(spec, FockVector::vacuum(spec.space()), settings(ProcessMode::Lattice, 0.01));
  const EnsembleResult e = run_ensemble(*s.ctx, 3, 4, 1);
  std::ostringstream out;
  write_trajectories_jsonl(out, e, nlohmann::json{{"config_hash", "abc"}});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  CHECK(header["schema_version"] == kTrajectorySchemaVersion);
  CHECK(header["config_hash"] == "abc");
  int records = 0;
  while (std::getline(in, line)) {
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.contains("seed"));
    CHECK(rec["mode"] == "lattice");
    CHECK(rec["samples"].size() == 2);
    ++records;
  }
  CHECK(records == 3);
}
