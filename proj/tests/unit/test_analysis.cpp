#include <doctest.h>

#include <numeric>

#include "bellqft/analysis.hpp"
#include "bellqft/error.hpp"
#include "support.hpp"

using namespace bellqft;

namespace {

StateSeries evolve_at(const FockVector& psi0, const OperatorBlocks& ops, std::vector<double> times) {
  PropagatorPlan plan;
  plan.t_final = times.back();
  plan.sample_times = std::move(times);
  return evolve(psi0, ops, plan);
}

std::vector<FockVector> states_of(const StateSeries& s) {
  std::vector<FockVector> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back(s.state(i));
  return out;
}

}  // namespace

TEST_CASE("total variation of simple distributions") {
  const std::vector<double> p{0.5, 0.5, 0.0};
  const std::vector<double> q{0.25, 0.25, 0.5};
  CHECK(total_variation(p, q) == doctest::Approx(0.5));
  CHECK(total_variation(p, p) == 0.0);
}

TEST_CASE("chi-square matches the closed form for two degrees of freedom") {
  const std::vector<double> counts{10, 20, 30};
  const std::vector<double> probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const ChiSquareResult r = chi_square(counts, probs);
  CHECK(r.statistic == doctest::Approx(10.0));
  CHECK(r.dof == 2);
  CHECK(r.p_value == doctest::Approx(std::exp(-5.0)).epsilon(1e-10));
  CHECK(r.pooled_bins == 0);
}

TEST_CASE("chi-square pools sparse bins") {
  const std::vector<double> counts{96, 98, 2, 2, 2};
  const std::vector<double> probs{0.48, 0.49, 0.01, 0.01, 0.01};
  const ChiSquareResult r = chi_square(counts, probs);
  CHECK(r.pooled_bins == 3);
  CHECK(r.bins == 3);
  CHECK(r.dof == 2);
  CHECK(r.statistic == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(1.0));

  // A pool still below 5 merges into the smallest closed bin.
  const std::vector<double> few{48, 49, 1, 1, 1};
  const ChiSquareResult s = chi_square(few, probs);
  CHECK(s.bins == 2);
  CHECK(s.dof == 1);
}

TEST_CASE("thresholds validation") {
  Thresholds t;
  CHECK_NOTHROW(t.validate());
  t.tv_max = 0.0;
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = Thresholds{};
  t.p_min = 1.5;
  CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("coarse binning groups sites into cells") {
  const ModelSpec spec = test::small_model(8, 2);
  const AtomTable atoms(spec.space());
  const Binning b = Binning::cells(atoms, 4);
  CHECK(b.bin_count() == 1 + 4 + 10);
  CHECK(b.bin_of(atoms.id_of_sites(std::vector<int>{0})) == b.bin_of(atoms.id_of_sites(std::vector<int>{1})));
  CHECK(b.bin_of(atoms.id_of_sites(std::vector<int>{1})) != b.bin_of(atoms.id_of_sites(std::vector<int>{2})));
  CHECK(b.bin_of(atoms.id_of_sites(std::vector<int>{0, 7})) == b.bin_of(atoms.id_of_sites(std::vector<int>{6, 1})));
  CHECK_THROWS_AS(Binning::cells(atoms, 3), ValidationError);
  const std::vector<double> ones(atoms.size(), 1.0);
  const auto agg = b.aggregate(ones);
  CHECK(std::accumulate(agg.begin(), agg.end(), 0.0) == doctest::Approx(double(atoms.size())));
  CHECK(Binning::atoms(atoms).bin_count() == atoms.size());
}

TEST_CASE("atom probabilities sum to one and match orbit weights") {
  const ModelSpec spec = test::small_model(5, 2, 1.0, 5.0);
  const AtomTable atoms(spec.space());
  Rng rng(31);
  const FockVector psi = random_state(spec.space(), rng);
  const auto p = atom_probabilities(psi, atoms);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
  for (std::size_t id = 0; id < atoms.size(); ++id) {
    CHECK(p[id] == doctest::Approx(std::norm(test::orbit_vector(atoms, id).dot(psi.to_orthonormal()))));
  }
}

TEST_CASE("calibration passes and the frozen negative control fails") {
  const ModelSpec spec = test::small_model(8, 2, 1.0);
  const OperatorBlocks ops = build_operators(spec);
  const AtomTable atoms(spec.space());
  const FockVector vac = FockVector::vacuum(spec.space());
  const std::vector<double> times{0.8, 1.0, 1.2};
  const StateSeries series = evolve_at(vac, ops, times);

  const EnsembleResult good = direct_ensemble(states_of(series), times, 10000, 7);
  const EquivarianceReport pass = equivariance_test(good, series, atoms, Thresholds{}, 0.0, ProcessMode::Lattice);
  CHECK(pass.pass);
  CHECK(pass.used == 10000);
  CHECK(pass.times.size() == 3);

  const std::vector<FockVector> frozen(3, vac);
  const EnsembleResult bad = direct_ensemble(frozen, times, 10000, 7);
  const EquivarianceReport fail = equivariance_test(bad, series, atoms, Thresholds{}, 0.0, ProcessMode::Lattice);
  CHECK_FALSE(fail.pass);
  for (const auto& tr : fail.times) CHECK(tr.tv > 0.3);

  const auto j = pass.to_json();
  CHECK(j["pass"] == true);
  CHECK(j["times"].size() == 3);
  CHECK(j["criteria"]["tv_max"] == 0.05);
  CHECK(pass.summary().find("PASS") != std::string::npos);
}

TEST_CASE("sampling error shrinks like one over root M") {
  const ModelSpec spec = test::small_model(8, 2, 1.0);
  const OperatorBlocks ops = build_operators(spec);
  const AtomTable atoms(spec.space());
  const std::vector<double> times{1.0};
  const StateSeries series = evolve_at(FockVector::vacuum(spec.space()), ops, times);
  auto mean_tv = [&](std::size_t m) {
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto e = direct_ensemble(states_of(series), times, m, seed);
      sum += equivariance_test(e, series, atoms, Thresholds{}, 0.0, ProcessMode::Lattice).times[0].tv;
    }
    return sum / 20.0;
  };
  const double ratio = mean_tv(1000) / mean_tv(4000);
  CHECK(ratio > 1.7);
  CHECK(ratio < 2.3);
}

TEST_CASE("generator identity holds for random states") {
  const ModelSpec spec = test::small_model(6, 2, 0.9, 6.0);
  const OperatorBlocks ops = build_operators(spec);
  const AtomTable atoms(spec.space());
  const TransitionKernel kernel(spec, atoms);
  Rng rng(41);
  for (int i = 0; i < 5; ++i) {
    const FockVector psi = random_state(spec.space(), rng);
    const GeneratorReport r = generator_identity_check(psi, kernel, ops);
    CHECK(r.passed());
    CHECK(r.sector_max_error.size() == 3);
  }
}

TEST_CASE("generator identity is phase invariant and trivial for real states") {
  const ModelSpec spec = test::small_model(6, 2, 0.9, 6.0);
  const OperatorBlocks ops = build_operators(spec);
  const AtomTable atoms(spec.space());
  const TransitionKernel kernel(spec, atoms);
  Rng rng(42);
  FockVector psi = random_state(spec.space(), rng);
  const double before = generator_identity_check(psi, kernel, ops).max_error;
  psi *= std::exp(cplx(0.0, 1.234));
  CHECK(generator_identity_check(psi, kernel, ops).max_error < 1e-10);
  CHECK(before < 1e-10);

  FockVector real(spec.space());
  for (int n = 0; n <= 2; ++n) {
    for (Eigen::Index i = 0; i < real.block(n).size(); ++i) real.block(n)[i] = psi.block(n)[i].real();
  }
  real.normalize();
  const auto rate = density_rate(real, ops);
  CHECK(std::abs(rate.total()) < 1e-14);
  CHECK(generator_identity_check(real, kernel, ops).passed());
}

TEST_CASE("PV equivalence report passes on a generic state") {
  const ModelSpec spec = test::small_model(5, 2, 0.7, 5.0);
  const OperatorBlocks ops = build_operators(spec);
  const AtomTable atoms(spec.space());
  const TransitionKernel kernel(spec, atoms);
  Rng rng(43);
  const FockVector psi = random_state(spec.space(), rng);
  const PvEquivalenceReport r = pv_equivalence_check(psi, spec, ops, kernel);
  CHECK(r.passed());
  CHECK(r.items.size() == 3);
  CHECK(r.configurations == atoms.size());
  CHECK(r.to_json()["pass"] == true);
}

TEST_CASE("exact chain law converges at first order in dt") {
  const ModelSpec spec = test::small_model(8, 2, 1.0);
  const OperatorBlocks ops = build_operators(spec);
  const FockVector vac = FockVector::vacuum(spec.space());
  std::vector<double> errors;
  for (double dt : {0.02, 0.01, 0.005}) {
    ProcessSettings ps;
    ps.mode = ProcessMode::Lattice;
    ps.dt = dt;
    ps.t_final = 1.0;
    ps.sample_times = {1.0};
    const StateSeries mesh = process_mesh(vac, ops, ps);
    const ProcessContext ctx(spec, mesh, ps);
    const auto initial = atom_probabilities(vac, ctx.atoms());
    const ChainLaw law = lattice_chain_law(ctx, initial);
    REQUIRE(law.laws.size() == 1);
    CHECK(law.failed_mass == 0.0);
    CHECK(std::accumulate(law.laws[0].begin(), law.laws[0].end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    const auto target = atom_probabilities(mesh.state(mesh.size() - 1), ctx.atoms());
    errors.push_back(total_variation(law.laws[0], target));
  }
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    const double ratio = errors[i] / errors[i + 1];
    CHECK(ratio > 1.7);
    CHECK(ratio < 2.3);
  }
}
