#include "bellqft/model.hpp"

#include <cmath>
#include <string>

#include "bellqft/error.hpp"

namespace bellqft {

namespace {

using Triplet = Eigen::Triplet<cplx>;

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ValidationError(key + " " + what);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

/// Copy the [rows) x [cols) window of a sparse operator.
SparseOperator window(const SparseOperator& op, std::size_t row0, std::size_t rows, std::size_t col0,
                      std::size_t cols) {
  std::vector<Triplet> triplets;
  for (Eigen::Index k = 0; k < op.outerSize(); ++k) {
    for (SparseOperator::InnerIterator it(op, k); it; ++it) {
      const auto r = static_cast<std::size_t>(it.row());
      const auto c = static_cast<std::size_t>(it.col());
      if (r >= row0 && r < row0 + rows && c >= col0 && c < col0 + cols) {
        triplets.emplace_back(static_cast<int>(r - row0), static_cast<int>(c - col0), it.value());
      }
    }
  }
  SparseOperator out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

}  // namespace

void ModelSpec::validate() const {
  require(n_max >= 0 && n_max <= 3, "model.n_max", "must lie in [0, 3]");
  require(finite_positive(mass), "model.mass", "must be positive");
  require(finite_positive(hbar), "model.hbar", "must be positive");
  require(std::isfinite(coupling) && coupling >= 0.0, "model.coupling", "must be nonnegative");
  if (form_factor.width) require(finite_positive(*form_factor.width), "model.form_factor.width", "must be positive");
  if (form_factor.center) require(std::isfinite(*form_factor.center), "model.form_factor.center", "must be finite");
  require(finite_positive(dirac.c), "model.dirac.c", "must be positive");
  require(std::isfinite(dirac.mass) && dirac.mass >= 0.0, "model.dirac.mass", "must be nonnegative");
}

double ModelSpec::hopping() const {
  const double a = grid.spacing();
  return hbar * hbar / (2.0 * mass * a * a);
}

std::vector<double> ModelSpec::form_factor_values() const {
  const double a = grid.spacing();
  const double center = form_factor.center.value_or(0.5 * grid.length());
  std::vector<double> phi(static_cast<std::size_t>(grid.n_sites()), 0.0);
  if (form_factor.shape == FormFactorSpec::Shape::Point) {
    phi[static_cast<std::size_t>(grid.nearest_site(center))] = 1.0 / std::sqrt(a);
    return phi;
  }
  const double width = form_factor.width.value_or(2.0 * a);
  double norm2 = 0.0;
  for (int k = 0; k < grid.n_sites(); ++k) {
    const double d = grid.displacement(center, grid.site_position(k));
    const double v = std::exp(-d * d / (2.0 * width * width));
    phi[static_cast<std::size_t>(k)] = v;
    norm2 += a * v * v;
  }
  for (double& v : phi) v /= std::sqrt(norm2);
  return phi;
}

OperatorBlocks::OperatorBlocks(FockSpace s) : space(std::move(s)) {
  const auto dim = static_cast<Eigen::Index>(space.dimension());
  h0.resize(dim, dim);
  h_interaction.resize(dim, dim);
  total.resize(dim, dim);
}

double OperatorBlocks::hermiticity_defect() const {
  const SparseOperator diff = total - SparseOperator(total.adjoint());
  double worst = 0.0;
  for (Eigen::Index k = 0; k < diff.outerSize(); ++k) {
    for (SparseOperator::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  return worst;
}

SparseOperator one_particle_kinetic(const ModelSpec& spec) {
  const int n = spec.grid.n_sites();
  const double hop = spec.hopping();
  std::vector<Triplet> triplets;
  for (int k = 0; k < n; ++k) {
    triplets.emplace_back(k, k, 2.0 * hop);
    triplets.emplace_back(k, spec.grid.wrap(k + 1), -hop);
    triplets.emplace_back(k, spec.grid.wrap(k - 1), -hop);
  }
  SparseOperator h(n, n);
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

OperatorBlocks build_h0(const ModelSpec& spec) {
  spec.validate();
  const FockSpace space = spec.space();
  OperatorBlocks ops(space);
  ops.hbar = spec.hbar;
  const double hop = spec.hopping();
  const auto& grid = spec.grid;

  std::vector<Triplet> full;
  std::vector<int> tuple;
  for (int n = 0; n <= space.n_max(); ++n) {
    std::vector<Triplet> triplets;
    tuple.resize(static_cast<std::size_t>(n));
    for (std::size_t idx = 0; idx < space.block_size(n); ++idx) {
      space.decode(n, idx, tuple);
      const auto row = static_cast<int>(idx);
      if (n > 0) triplets.emplace_back(row, row, 2.0 * hop * n);
      for (int i = 0; i < n; ++i) {
        auto& site = tuple[static_cast<std::size_t>(i)];
        const int original = site;
        for (int step : {+1, -1}) {
          site = grid.wrap(original + step);
          triplets.emplace_back(row, static_cast<int>(space.encode(tuple)), -hop);
        }
        site = original;
      }
    }
    const auto size = static_cast<Eigen::Index>(space.block_size(n));
    SparseOperator block(size, size);
    block.setFromTriplets(triplets.begin(), triplets.end());
    for (const auto& t : triplets) {
      full.emplace_back(static_cast<int>(space.offset(n)) + t.row(), static_cast<int>(space.offset(n)) + t.col(),
                        t.value());
    }
    ops.h0_blocks.push_back(std::move(block));
  }
  ops.h0.setFromTriplets(full.begin(), full.end());
  ops.total = ops.h0;
  for (int n = 0; n < space.n_max(); ++n) {
    ops.creation_blocks.emplace_back(static_cast<Eigen::Index>(space.block_size(n + 1)),
                                     static_cast<Eigen::Index>(space.block_size(n)));
  }
  return ops;
}

SparseOperator smeared_creation(const FockSpace& space, std::span<const double> profile) {
  if (profile.size() != static_cast<std::size_t>(space.n_sites())) {
    throw ValidationError("creation profile must have one entry per site");
  }
  const double sqrt_a = std::sqrt(space.grid().spacing());
  std::vector<Triplet> triplets;
  std::vector<int> tuple;
  std::vector<int> rest;
  for (int n = 0; n < space.n_max(); ++n) {
    const int m = n + 1;
    const double scale = sqrt_a / std::sqrt(static_cast<double>(m));
    tuple.resize(static_cast<std::size_t>(m));
    for (std::size_t idx = 0; idx < space.block_size(m); ++idx) {
      space.decode(m, idx, tuple);
      for (int i = 0; i < m; ++i) {
        const double f = profile[static_cast<std::size_t>(tuple[static_cast<std::size_t>(i)])];
        if (f == 0.0) continue;
        rest = tuple;
        rest.erase(rest.begin() + i);
        triplets.emplace_back(static_cast<int>(space.offset(m) + idx),
                              static_cast<int>(space.offset(n) + space.encode(rest)), scale * f);
      }
    }
  }
  const auto dim = static_cast<Eigen::Index>(space.dimension());
  SparseOperator insert(dim, dim);
  insert.setFromTriplets(triplets.begin(), triplets.end());
  SparseOperator op = insert * symmetrizer(space);
  op.prune(cplx(0.0), 1e-15);
  return op;
}

OperatorBlocks build_hI(const ModelSpec& spec) {
  spec.validate();
  const FockSpace space = spec.space();
  OperatorBlocks ops(space);
  ops.hbar = spec.hbar;
  for (int n = 0; n <= space.n_max(); ++n) {
    const auto size = static_cast<Eigen::Index>(space.block_size(n));
    ops.h0_blocks.emplace_back(size, size);
  }

  const std::vector<double> phi = spec.form_factor_values();
  const SparseOperator up = spec.coupling * smeared_creation(space, phi);
  ops.h_interaction = up + SparseOperator(up.adjoint());
  ops.h_interaction.prune(cplx(0.0), 0.0);
  for (int n = 0; n < space.n_max(); ++n) {
    ops.creation_blocks.push_back(
        window(up, space.offset(n + 1), space.block_size(n + 1), space.offset(n), space.block_size(n)));
  }
  ops.total = ops.h_interaction;
  return ops;
}

OperatorBlocks build_operators(const ModelSpec& spec) {
  OperatorBlocks ops = build_h0(spec);
  const OperatorBlocks inter = build_hI(spec);
  ops.h_interaction = inter.h_interaction;
  ops.creation_blocks = inter.creation_blocks;
  ops.total = ops.h0 + ops.h_interaction;
  ops.total.makeCompressed();
  return ops;
}

SparseOperator build_dirac(const ModelSpec& spec) {
  spec.validate();
  if (spec.mode != ModelMode::Dirac1p) throw ValidationError("mode must be dirac_1p to build the Dirac operator");
  const int n = spec.grid.n_sites();
  const double a = spec.grid.spacing();
  const double c = spec.dirac.c;
  const double rest = spec.dirac.mass * c * c;
  const cplx forward(0.0, -spec.hbar * c / (2.0 * a));  // coefficient of psi(k+1)

  std::vector<Triplet> triplets;
  for (int k = 0; k < n; ++k) {
    for (int s = 0; s < 2; ++s) {
      const int row = 2 * k + s;
      triplets.emplace_back(row, row, s == 0 ? rest : -rest);
      triplets.emplace_back(row, 2 * spec.grid.wrap(k + 1) + (1 - s), forward);
      triplets.emplace_back(row, 2 * spec.grid.wrap(k - 1) + (1 - s), -forward);
    }
  }
  SparseOperator h(2 * n, 2 * n);
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

// --- initial states -------------------------------------------------------------

FockVector build_initial_state(const ModelSpec& spec, const InitialStateSpec& init) {
  const FockSpace space = spec.space();
  const auto& grid = spec.grid;
  FockVector psi(space);
  psi.block(0)[0] = init.vacuum_amplitude;

  std::vector<int> tuple;
  for (std::size_t p = 0; p < init.packets.size(); ++p) {
    const auto& packet = init.packets[p];
    const std::string key = "initial_state.packets[" + std::to_string(p) + "]";
    require(packet.sector >= 1 && packet.sector <= space.n_max(), key + ".sector", "must lie in [1, n_max]");
    require(finite_positive(packet.width), key + ".width", "must be positive");

    std::vector<cplx> one(static_cast<std::size_t>(grid.n_sites()));
    for (int k = 0; k < grid.n_sites(); ++k) {
      const double d = grid.displacement(packet.center, grid.site_position(k));
      one[static_cast<std::size_t>(k)] =
          std::exp(cplx(-d * d / (4.0 * packet.width * packet.width), packet.momentum * d));
    }
    const int n = packet.sector;
    Eigen::VectorXcd block(static_cast<Eigen::Index>(space.block_size(n)));
    tuple.resize(static_cast<std::size_t>(n));
    for (std::size_t idx = 0; idx < space.block_size(n); ++idx) {
      space.decode(n, idx, tuple);
      cplx v = 1.0;
      for (int s : tuple) v *= one[static_cast<std::size_t>(s)];
      block[static_cast<Eigen::Index>(idx)] = v;
    }
    block /= std::sqrt(space.weight(n) * block.squaredNorm());
    psi.block(n) += packet.amplitude * block;
  }
  if (!(psi.norm() > 0.0)) throw ValidationError("initial_state has zero norm");
  psi.normalize();
  return psi;
}

Eigen::VectorXcd build_spinor_state(const ModelSpec& spec, const SpinorStateSpec& init) {
  const auto& grid = spec.grid;
  Eigen::VectorXcd spinor(2 * grid.n_sites());
  for (int k = 0; k < grid.n_sites(); ++k) {
    cplx envelope = 1.0;
    if (!init.uniform) {
      require(finite_positive(init.width), "initial_state.dirac.width", "must be positive");
      const double d = grid.displacement(init.center, grid.site_position(k));
      envelope = std::exp(cplx(-d * d / (4.0 * init.width * init.width), init.momentum * d));
    }
    spinor[2 * k] = envelope * init.upper;
    spinor[2 * k + 1] = envelope * init.lower;
  }
  const double nrm = spinor.norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm)) throw ValidationError("initial_state.dirac spinor has zero norm");
  return spinor / nrm;
}

}  // namespace bellqft
