#include <doctest.h>

#include "bellqft/error.hpp"
#include "bellqft/jumps.hpp"
#include "support.hpp"

using namespace bellqft;
using test::orbit_vector;

namespace {

struct Fixture {
  explicit Fixture(ModelSpec s) : spec(std::move(s)), ops(build_operators(spec)), atoms(spec.space()), kernel(spec, atoms) {
    for (std::size_t id = 0; id < atoms.size(); ++id) orbits.push_back(orbit_vector(atoms, id));
  }

  /// Occupation-basis amplitude of Psi on one atom.
  cplx amplitude(const FockVector& psi, std::size_t id) const { return orbits[id].dot(psi.to_orthonormal()); }

  ModelSpec spec;
  OperatorBlocks ops;
  AtomTable atoms;
  TransitionKernel kernel;
  std::vector<Eigen::VectorXcd> orbits;
};

FockVector seeded(const FockSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  return random_state(space, rng);
}

}  // namespace

TEST_CASE("kernel links equal Hamiltonian elements between occupation states") {
  const Fixture fx(test::small_model(5, 3, 0.9, 5.0));
  const Eigen::MatrixXcd h = test::dense(fx.ops.total);
  for (std::size_t src = 0; src < fx.atoms.size(); ++src) {
    const Eigen::VectorXcd hs = h * fx.orbits[src];
    for (std::size_t dst = 0; dst < fx.atoms.size(); ++dst) {
      if (dst == src) continue;
      const cplx oracle = fx.orbits[dst].dot(hs);
      const auto* link = fx.kernel.find_link(static_cast<int>(src), static_cast<int>(dst));
      if (link == nullptr) {
        CHECK(std::abs(oracle) < 1e-13);
      } else {
        CHECK(std::abs(oracle - link->element) < 1e-13);
      }
    }
  }
}

TEST_CASE("link kinds match the change in particle number") {
  const Fixture fx(test::small_model(6, 2, 1.0, 6.0));
  for (std::size_t src = 0; src < fx.atoms.size(); ++src) {
    const int n = fx.atoms[src].sector;
    for (const auto& l : fx.kernel.interaction_links(static_cast<int>(src))) {
      const int m = fx.atoms[static_cast<std::size_t>(l.target)].sector;
      CHECK(std::abs(m - n) == 1);
      CHECK(l.kind == (m > n ? JumpKind::Creation : JumpKind::Annihilation));
    }
    for (const auto& l : fx.kernel.hop_links(static_cast<int>(src))) {
      CHECK(fx.atoms[static_cast<std::size_t>(l.target)].sector == n);
      CHECK(l.kind == JumpKind::Hop);
      CHECK(std::abs(fx.spec.grid.displacement(l.from_site, l.site)) == doctest::Approx(fx.spec.grid.spacing()));
    }
  }
}

TEST_CASE("rates match the occupation-basis formula and the PV form") {
  const Fixture fx(test::small_model(5, 2, 1.1, 5.0));
  const FockVector psi = seeded(fx.spec.space(), 21);
  const Eigen::MatrixXcd h = test::dense(fx.ops.total);
  std::vector<cplx> c(fx.atoms.size());
  for (std::size_t id = 0; id < fx.atoms.size(); ++id) c[id] = fx.amplitude(psi, id);

  for (std::size_t src = 0; src < fx.atoms.size(); ++src) {
    const RateKernelRow row = lattice_rates(psi, fx.kernel, static_cast<int>(src));
    const RateKernelRow pv = pv_rates(psi, fx.ops, fx.atoms, static_cast<int>(src), true);
    double total = 0.0;
    for (std::size_t dst = 0; dst < fx.atoms.size(); ++dst) {
      if (dst == src) continue;
      const cplx element = fx.orbits[dst].dot(h * fx.orbits[src]);
      const double oracle = 2.0 / fx.spec.hbar * std::max(std::imag(std::conj(c[dst]) * element * c[src]), 0.0) /
                            std::norm(c[src]);
      total += oracle;
      double got = 0.0;
      for (const auto& d : row.destinations) {
        if (d.atom == static_cast<int>(dst)) got = d.rate;
      }
      double got_pv = 0.0;
      for (const auto& d : pv.destinations) {
        if (d.atom == static_cast<int>(dst)) got_pv = d.rate;
      }
      CHECK(std::abs(got - oracle) <= 1e-10 * std::max(1.0, oracle));
      CHECK(std::abs(got_pv - oracle) <= 1e-10 * std::max(1.0, oracle));
    }
    CHECK(row.total_rate == doctest::Approx(total).epsilon(1e-10));
    for (const auto& d : row.destinations) CHECK(d.rate > 0.0);
  }
}

TEST_CASE("interaction-only rates exclude hops") {
  const Fixture fx(test::small_model(6, 2, 1.0, 6.0));
  const FockVector psi = seeded(fx.spec.space(), 22);
  for (std::size_t src = 0; src < fx.atoms.size(); ++src) {
    const RateKernelRow row = jump_rates(psi, fx.kernel, static_cast<int>(src));
    for (const auto& d : row.destinations) CHECK(d.kind != JumpKind::Hop);
  }
}

TEST_CASE("real wavefunctions generate no jumps") {
  const Fixture fx(test::small_model(6, 2, 1.0, 6.0));
  const FockVector vac = FockVector::vacuum(fx.spec.space());
  CHECK(jump_rates(vac, fx.kernel, 0).total_rate == 0.0);
  CHECK(lattice_rates(vac, fx.kernel, 0).destinations.empty());
}

TEST_CASE("net flux is antisymmetric and equals the matrix-element flux") {
  const Fixture fx(test::small_model(6, 2, 0.8, 6.0));
  const FockVector psi = seeded(fx.spec.space(), 23);
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t src = 0; src < fx.atoms.size(); ++src) {
    for (const auto* links : {&fx.kernel.interaction_links(static_cast<int>(src)),
                              &fx.kernel.hop_links(static_cast<int>(src))}) {
      for (const auto& l : *links) pairs.emplace_back(l.target, static_cast<int>(src));
    }
  }
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto [q, qp] = pairs[rng.index(pairs.size())];
    const double j = net_flux(psi, fx.kernel, q, qp);
    CHECK(std::abs(j + net_flux(psi, fx.kernel, qp, q)) < 1e-12);
    CHECK(std::abs(j - flux_element(psi, fx.kernel, q, qp)) < 1e-12);
  }
  CHECK_THROWS_AS(net_flux(psi, fx.kernel, 0, static_cast<int>(fx.atoms.sector_begin(2))), ValidationError);
}

TEST_CASE("continuum configurations use the rates of their snapped atom") {
  const Fixture fx(test::small_model(8, 2, 1.0, 8.0));
  const FockVector psi = seeded(fx.spec.space(), 24);
  const Configuration q{{2.3, 6.6}};
  const int id = fx.atoms.id_of(q);
  CHECK(fx.atoms[static_cast<std::size_t>(id)].sites == std::vector<int>{2, 7});
  const RateKernelRow a = jump_rates(psi, fx.kernel, q);
  const RateKernelRow b = jump_rates(psi, fx.kernel, id);
  CHECK(a.total_rate == b.total_rate);
  CHECK(a.destinations.size() == b.destinations.size());
  CHECK_THROWS_AS(jump_rates(psi, fx.kernel, Configuration{{1.0, 2.0, 3.0}}), ValidationError);
}

TEST_CASE("rates at a node raise NodeError") {
  const Fixture fx(test::small_model(6, 1, 1.0, 6.0));
  FockVector psi(fx.spec.space());
  psi.block(1)[3] = 1.0;
  psi.normalize();
  CHECK_THROWS_AS(jump_rates(psi, fx.kernel, 0), NodeError);
  CHECK_NOTHROW(jump_rates(psi, fx.kernel, 4));
}

TEST_CASE("Bernoulli thinning respects the guard and the destination weights") {
  RateKernelRow row;
  row.destinations.push_back({1, JumpKind::Creation, 0, -1, 1.0});
  row.destinations.push_back({2, JumpKind::Creation, 1, -1, 3.0});
  row.total_rate = 4.0;
  const double dt = 0.02;
  Rng rng(3);
  const int draws = 200000;
  int first = 0;
  int second = 0;
  for (int i = 0; i < draws; ++i) {
    const auto d = sample_jump(row, dt, rng);
    if (!d) continue;
    (d->atom == 1 ? first : second) += 1;
  }
  CHECK(std::abs(first / double(draws) - 0.02) < test::binomial_tolerance(0.02, draws));
  CHECK(std::abs(second / double(draws) - 0.06) < test::binomial_tolerance(0.06, draws));
  CHECK_THROWS_AS(sample_jump(row, 0.03, rng), StepSizeError);
  RateKernelRow empty;
  CHECK_FALSE(sample_jump(empty, 1.0, rng).has_value());
}
