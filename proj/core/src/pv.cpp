#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "bellqft/error.hpp"
#include "bellqft/fock.hpp"

namespace bellqft {

namespace {

using Triplet = Eigen::Triplet<cplx>;

SparseOperator make_sparse(std::size_t dim, const std::vector<Triplet>& triplets) {
  SparseOperator op(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  op.setFromTriplets(triplets.begin(), triplets.end());
  op.makeCompressed();
  return op;
}

/// (I u)(t) = (n+1)^{-1/2} sum_i [t_i = k] u(t without i), sector n -> n+1.
SparseOperator insertion_sum(const FockSpace& space, int site) {
  std::vector<Triplet> triplets;
  std::vector<int> tuple;
  std::vector<int> rest;
  for (int n = 0; n < space.n_max(); ++n) {
    const int m = n + 1;
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    tuple.resize(static_cast<std::size_t>(m));
    for (std::size_t idx = 0; idx < space.block_size(m); ++idx) {
      space.decode(m, idx, tuple);
      for (int i = 0; i < m; ++i) {
        if (tuple[static_cast<std::size_t>(i)] != site) continue;
        rest = tuple;
        rest.erase(rest.begin() + i);
        triplets.emplace_back(static_cast<int>(space.offset(m) + idx),
                              static_cast<int>(space.offset(n) + space.encode(rest)), scale);
      }
    }
  }
  return make_sparse(space.dimension(), triplets);
}

std::vector<std::vector<int>> permutations(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> all;
  do {
    all.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return all;
}

double max_abs(const Eigen::MatrixXcd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

SparseOperator symmetrizer(const FockSpace& space) {
  std::vector<Triplet> triplets;
  std::vector<int> tuple;
  std::vector<int> permuted;
  for (int n = 0; n <= space.n_max(); ++n) {
    const auto perms = permutations(n);
    const double scale = 1.0 / static_cast<double>(perms.size());
    tuple.resize(static_cast<std::size_t>(n));
    permuted.resize(static_cast<std::size_t>(n));
    for (std::size_t idx = 0; idx < space.block_size(n); ++idx) {
      space.decode(n, idx, tuple);
      for (const auto& p : perms) {
        for (int i = 0; i < n; ++i) permuted[static_cast<std::size_t>(i)] = tuple[static_cast<std::size_t>(p[static_cast<std::size_t>(i)])];
        triplets.emplace_back(static_cast<int>(space.offset(n) + idx),
                              static_cast<int>(space.offset(n) + space.encode(permuted)), scale);
      }
    }
  }
  return make_sparse(space.dimension(), triplets);
}

FockVector random_state(const FockSpace& space, Rng& rng) {
  Eigen::VectorXcd u(static_cast<Eigen::Index>(space.dimension()));
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    // Box-Muller; 1 - uniform() lies in (0, 1].
    const double r = std::sqrt(-2.0 * std::log(1.0 - rng.uniform()));
    const double phase = 2.0 * M_PI * rng.uniform();
    u[i] = cplx(r * std::cos(phase), r * std::sin(phase));
  }
  u = symmetrizer(space) * u;
  u.normalize();
  return FockVector::from_orthonormal(space, u);
}

SparseOperator creation_operator(const FockSpace& space, int site) {
  if (site < 0 || site >= space.n_sites()) throw ValidationError("creation site outside the grid");
  SparseOperator op = insertion_sum(space, site) * symmetrizer(space);
  op.prune(cplx(0.0), 1e-15);
  return op;
}

SparseOperator annihilation_operator(const FockSpace& space, int site) {
  return SparseOperator(creation_operator(space, site).adjoint());
}

SparseOperator number_operator(const FockSpace& space, std::span<const int> region) {
  const auto dim = static_cast<Eigen::Index>(space.dimension());
  SparseOperator total(dim, dim);
  for (int k : region) {
    if (k < 0 || k >= space.n_sites()) throw ValidationError("region site outside the grid");
    const SparseOperator up = creation_operator(space, k);
    total += SparseOperator(up * SparseOperator(up.adjoint()));
  }
  total.prune(cplx(0.0), 1e-15);
  return total;
}

SparseOperator count_operator(const FockSpace& space, std::span<const int> region) {
  std::vector<char> in_region(static_cast<std::size_t>(space.n_sites()), 0);
  for (int k : region) in_region.at(static_cast<std::size_t>(k)) = 1;
  std::vector<Triplet> triplets;
  std::vector<int> tuple;
  for (int n = 1; n <= space.n_max(); ++n) {
    tuple.resize(static_cast<std::size_t>(n));
    for (std::size_t idx = 0; idx < space.block_size(n); ++idx) {
      space.decode(n, idx, tuple);
      int count = 0;
      for (int s : tuple) count += in_region[static_cast<std::size_t>(s)];
      if (count != 0) {
        const auto flat = static_cast<int>(space.offset(n) + idx);
        triplets.emplace_back(flat, flat, static_cast<double>(count));
      }
    }
  }
  return make_sparse(space.dimension(), triplets);
}

// --- PV measure -----------------------------------------------------------------

ConfigRegion::ConfigRegion(const FockSpace& space, bool filled) : space_(space) {
  for (int n = 0; n <= space.n_max(); ++n) {
    mask_.emplace_back(space.block_size(n), filled ? 1 : 0);
  }
}

ConfigRegion ConfigRegion::of_atom(const AtomTable& atoms, std::size_t id) {
  ConfigRegion region(atoms.space());
  const int n = atoms[id].sector;
  for (std::size_t idx = 0; idx < atoms.space().block_size(n); ++idx) {
    if (atoms.id_of_tuple(n, idx) == static_cast<int>(id)) region.insert(n, idx);
  }
  return region;
}

FockVector pv_project(const FockVector& psi, const ConfigRegion& region) {
  if (!(psi.space() == region.space())) throw ValidationError("region and state live on different spaces");
  FockVector out(psi.space());
  for (int n = 0; n <= psi.space().n_max(); ++n) {
    for (std::size_t idx = 0; idx < psi.space().block_size(n); ++idx) {
      if (region.contains(n, idx)) out.block(n)[static_cast<Eigen::Index>(idx)] = psi.at(n, idx);
    }
  }
  return out;
}

Eigen::VectorXcd pv_project(const Eigen::VectorXcd& u, const ConfigRegion& region) {
  const auto& space = region.space();
  if (static_cast<std::size_t>(u.size()) != space.dimension()) throw ValidationError("vector dimension mismatch");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(u.size());
  for (int n = 0; n <= space.n_max(); ++n) {
    for (std::size_t idx = 0; idx < space.block_size(n); ++idx) {
      if (region.contains(n, idx)) {
        const auto flat = static_cast<Eigen::Index>(space.offset(n) + idx);
        out[flat] = u[flat];
      }
    }
  }
  return out;
}

bool PvConsistencyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const PvCheck& c) { return c.passed; });
}

const PvCheck* PvConsistencyReport::failure() const {
  for (const auto& c : checks) {
    if (!c.passed) return &c;
  }
  return nullptr;
}

PvConsistencyReport verify_pv_consistency(const GridSpec& grid, int n_max) {
  std::vector<std::vector<int>> regions{{}, {0}};
  if (grid.n_sites() > 2) regions.push_back({1, 2});
  std::vector<int> all(static_cast<std::size_t>(grid.n_sites()));
  std::iota(all.begin(), all.end(), 0);
  regions.push_back(all);
  return verify_pv_consistency(grid, n_max, regions);
}

PvConsistencyReport verify_pv_consistency(const GridSpec& grid, int n_max,
                                          const std::vector<std::vector<int>>& regions) {
  const FockSpace space(grid, n_max);
  if (space.dimension() > 5000) {
    throw DimensionError("verify_pv_consistency is dense; total dimension must be <= 5000");
  }
  const AtomTable atoms(space);
  const auto dim = static_cast<Eigen::Index>(space.dimension());
  const Eigen::MatrixXcd sym = Eigen::MatrixXcd(symmetrizer(space));

  // Family under test: the requested regions plus every single site.
  std::vector<std::vector<int>> family = regions;
  for (int k = 0; k < grid.n_sites(); ++k) family.push_back({k});
  std::vector<Eigen::MatrixXcd> ops;
  ops.reserve(family.size());
  for (const auto& r : family) ops.emplace_back(Eigen::MatrixXcd(number_operator(space, r)));

  PvConsistencyReport report;

  {
    PvCheck c{"pairwise_commutation", true, 0.0, ""};
    for (std::size_t i = 0; i < ops.size(); ++i) {
      for (std::size_t j = i + 1; j < ops.size(); ++j) {
        const double err = max_abs(ops[i] * ops[j] - ops[j] * ops[i]);
        if (err > c.max_error) c.max_error = err;
      }
    }
    c.passed = c.max_error <= 1e-12;
    report.checks.push_back(c);
  }

  {
    PvCheck c{"integer_spectrum", true, 0.0, ""};
    for (std::size_t i = 0; i < ops.size(); ++i) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(ops[i], Eigen::EigenvaluesOnly);
      for (Eigen::Index e = 0; e < eig.eigenvalues().size(); ++e) {
        const double v = eig.eigenvalues()[e];
        const double err = v < -0.5 ? std::abs(v) : std::abs(v - std::round(v));
        if (err > c.max_error) {
          c.max_error = err;
          c.detail = "region #" + std::to_string(i) + " eigenvalue " + std::to_string(v);
        }
      }
    }
    c.passed = c.max_error <= 1e-9;
    report.checks.push_back(c);
  }

  {
    PvCheck c{"additivity", true, 0.0, ""};
    for (std::size_t i = 0; i < family.size(); ++i) {
      for (std::size_t j = 0; j < family.size(); ++j) {
        std::vector<int> a = family[i];
        std::vector<int> b = family[j];
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        std::vector<int> common;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
        if (!common.empty()) continue;
        std::vector<int> joined;
        std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(joined));
        const Eigen::MatrixXcd lhs = Eigen::MatrixXcd(number_operator(space, joined));
        const double err = max_abs(lhs - ops[i] - ops[j]);
        c.max_error = std::max(c.max_error, err);
      }
    }
    c.passed = c.max_error <= 1e-12;
    report.checks.push_back(c);
  }

  {
    PvCheck c{"ladder_equals_count", true, 0.0, ""};
    for (std::size_t i = 0; i < family.size(); ++i) {
      const Eigen::MatrixXcd count = Eigen::MatrixXcd(count_operator(space, family[i]));
      c.max_error = std::max(c.max_error, max_abs(ops[i] - count * sym));
    }
    c.passed = c.max_error <= 1e-12;
    report.checks.push_back(c);
  }

  {
    // Every atom's symmetric orbit vector is a joint eigenvector with the
    // coordinate counts as eigenvalues; single sites separate all atoms, so the
    // joint eigenspaces are exactly the ranges of P(atom) on the bosonic space.
    PvCheck c{"joint_eigenspaces", true, 0.0, ""};
    Eigen::MatrixXcd completeness = Eigen::MatrixXcd::Zero(dim, dim);
    for (std::size_t id = 0; id < atoms.size(); ++id) {
      const ConfigRegion orbit = ConfigRegion::of_atom(atoms, id);
      const Eigen::VectorXcd indicator = pv_project(Eigen::VectorXcd::Ones(dim), orbit);
      const Eigen::VectorXcd e = indicator / indicator.norm();
      completeness += e * e.adjoint();
      c.max_error = std::max(c.max_error, (sym * e - e).cwiseAbs().maxCoeff());
      for (std::size_t r = 0; r < family.size(); ++r) {
        int count = 0;
        for (int s : atoms[id].sites) {
          count += static_cast<int>(std::count(family[r].begin(), family[r].end(), s));
        }
        const double err = (ops[r] * e - static_cast<double>(count) * e).cwiseAbs().maxCoeff();
        if (err > c.max_error) {
          c.max_error = err;
          c.detail = "atom #" + std::to_string(id) + ", region #" + std::to_string(r);
        }
      }
    }
    c.max_error = std::max(c.max_error, max_abs(completeness - sym));
    c.passed = c.max_error <= 1e-12;
    report.checks.push_back(c);
  }

  return report;
}

}  // namespace bellqft
