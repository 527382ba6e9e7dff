#include "bellqft/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bellqft/error.hpp"

namespace bellqft {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

FockSpace::FockSpace(GridSpec grid, int n_max) : grid_(grid), n_max_(n_max) {
  if (n_max < 0 || n_max > 3) {
    throw ValidationError("n_max must lie in [0, 3]");
  }
  offsets_.push_back(0);
  std::size_t size = 1;
  for (int n = 0; n <= n_max; ++n) {
    block_sizes_.push_back(size);
    offsets_.push_back(offsets_.back() + size);
    weights_.push_back(std::pow(grid_.spacing(), n) / factorial(n));
    size *= static_cast<std::size_t>(grid_.n_sites());
  }
}

std::size_t FockSpace::encode(std::span<const int> sites) const {
  std::size_t index = 0;
  const auto n = static_cast<std::size_t>(grid_.n_sites());
  for (int s : sites) index = index * n + static_cast<std::size_t>(s);
  return index;
}

void FockSpace::decode(int n, std::size_t index, std::span<int> sites) const {
  const auto base = static_cast<std::size_t>(grid_.n_sites());
  for (int i = n - 1; i >= 0; --i) {
    sites[static_cast<std::size_t>(i)] = static_cast<int>(index % base);
    index /= base;
  }
}

int FockSpace::sector_of(std::size_t flat) const {
  for (int n = 0; n <= n_max_; ++n) {
    if (flat < offset(n + 1)) return n;
  }
  throw ValidationError("flat index outside the truncated Fock space");
}

// --- atoms ------------------------------------------------------------------

int Atom::occupation(int site) const {
  return static_cast<int>(std::count(sites.begin(), sites.end(), site));
}

AtomTable::AtomTable(const FockSpace& space) : space_(space) {
  const int n_sites = space.n_sites();
  std::vector<int> tuple;
  for (int n = 0; n <= space.n_max(); ++n) {
    sector_begin_.push_back(atoms_.size());
    std::vector<int> ids(space.block_size(n), -1);
    tuple.assign(static_cast<std::size_t>(n), 0);

    // Non-decreasing tuples in lexicographic order.
    while (true) {
      Atom atom;
      atom.sector = n;
      atom.sites = tuple;
      atom.block_index = space.encode(tuple);
      double denom = 1.0;
      for (std::size_t i = 0; i < tuple.size();) {
        std::size_t j = i;
        while (j < tuple.size() && tuple[j] == tuple[i]) ++j;
        denom *= factorial(static_cast<int>(j - i));
        i = j;
      }
      atom.multiplicity = factorial(n) / denom;
      ids[atom.block_index] = static_cast<int>(atoms_.size());
      atoms_.push_back(std::move(atom));

      int pos = n - 1;
      while (pos >= 0 && tuple[static_cast<std::size_t>(pos)] == n_sites - 1) --pos;
      if (pos < 0) break;
      const int next = tuple[static_cast<std::size_t>(pos)] + 1;
      for (int i = pos; i < n; ++i) tuple[static_cast<std::size_t>(i)] = next;
    }

    std::vector<int> sorted(static_cast<std::size_t>(n));
    for (std::size_t idx = 0; idx < space.block_size(n); ++idx) {
      space.decode(n, idx, sorted);
      std::sort(sorted.begin(), sorted.end());
      ids[idx] = ids[space.encode(sorted)];
    }
    id_by_tuple_.push_back(std::move(ids));
  }
  sector_begin_.push_back(atoms_.size());
}

int AtomTable::id_of_sites(std::span<const int> sites) const {
  const int n = static_cast<int>(sites.size());
  if (n > space_.n_max()) return -1;
  std::vector<int> sorted(sites.begin(), sites.end());
  for (int& s : sorted) s = space_.grid().wrap(s);
  std::sort(sorted.begin(), sorted.end());
  return id_by_tuple_[static_cast<std::size_t>(n)][space_.encode(sorted)];
}

int AtomTable::id_of(const Configuration& q) const {
  std::vector<int> sites;
  sites.reserve(q.positions.size());
  for (double x : q.positions) sites.push_back(space_.grid().nearest_site(x));
  return id_of_sites(sites);
}

Configuration AtomTable::configuration(std::size_t id) const {
  Configuration q;
  for (int s : atoms_[id].sites) q.positions.push_back(space_.grid().site_position(s));
  return q;
}

// --- FockVector ---------------------------------------------------------------

FockVector::FockVector(FockSpace space) : space_(std::move(space)) {
  for (int n = 0; n <= space_.n_max(); ++n) {
    blocks_.push_back(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space_.block_size(n))));
  }
}

FockVector FockVector::vacuum(const FockSpace& space) {
  FockVector psi(space);
  psi.block(0)[0] = 1.0;
  return psi;
}

FockVector FockVector::from_orthonormal(const FockSpace& space, const Eigen::VectorXcd& u) {
  if (static_cast<std::size_t>(u.size()) != space.dimension()) {
    throw ValidationError("orthonormal vector has the wrong dimension");
  }
  FockVector psi(space);
  for (int n = 0; n <= space.n_max(); ++n) {
    psi.block(n) = u.segment(static_cast<Eigen::Index>(space.offset(n)),
                             static_cast<Eigen::Index>(space.block_size(n))) /
                   std::sqrt(space.weight(n));
  }
  return psi;
}

Eigen::VectorXcd FockVector::to_orthonormal() const {
  Eigen::VectorXcd u(static_cast<Eigen::Index>(space_.dimension()));
  for (int n = 0; n <= space_.n_max(); ++n) {
    u.segment(static_cast<Eigen::Index>(space_.offset(n)),
              static_cast<Eigen::Index>(space_.block_size(n))) = block(n) * std::sqrt(space_.weight(n));
  }
  return u;
}

double FockVector::sector_mass(int n) const { return space_.weight(n) * block(n).squaredNorm(); }

double FockVector::norm_squared() const {
  double total = 0.0;
  for (int n = 0; n <= space_.n_max(); ++n) total += sector_mass(n);
  return total;
}

double FockVector::norm() const { return std::sqrt(norm_squared()); }

void FockVector::normalize() {
  const double nrm = norm();
  if (!(nrm > 0.0)) throw ValidationError("cannot normalize the zero vector");
  *this *= cplx(1.0 / nrm, 0.0);
}

FockVector& FockVector::operator*=(cplx s) {
  for (auto& b : blocks_) b *= s;
  return *this;
}

double FockVector::symmetry_defect(int n) const {
  const auto& b = block(n);
  const double scale = b.cwiseAbs().maxCoeff();
  if (n < 2 || scale == 0.0) return 0.0;
  double worst = 0.0;
  std::vector<int> sites(static_cast<std::size_t>(n));
  for (std::size_t idx = 0; idx < space_.block_size(n); ++idx) {
    space_.decode(n, idx, sites);
    for (int i = 0; i + 1 < n; ++i) {
      std::swap(sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(i) + 1]);
      const auto other = space_.encode(sites);
      std::swap(sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(i) + 1]);
      worst = std::max(worst, std::abs(b[static_cast<Eigen::Index>(idx)] - b[static_cast<Eigen::Index>(other)]));
    }
  }
  return worst / scale;
}

cplx inner_product(const FockVector& lhs, const FockVector& rhs) {
  if (!(lhs.space() == rhs.space())) throw ValidationError("inner product of vectors on different spaces");
  cplx total = 0.0;
  for (int n = 0; n <= lhs.space().n_max(); ++n) {
    total += lhs.space().weight(n) * lhs.block(n).dot(rhs.block(n));
  }
  return total;
}

// --- densities ----------------------------------------------------------------

SectorField::SectorField(FockSpace s) : space(std::move(s)) {
  for (int n = 0; n <= space.n_max(); ++n) {
    blocks.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.block_size(n))));
  }
}

double SectorField::sector_sum(int n) const { return blocks[static_cast<std::size_t>(n)].sum(); }

double SectorField::total() const {
  double t = 0.0;
  for (const auto& b : blocks) t += b.sum();
  return t;
}

std::vector<double> SectorField::atom_sums(const AtomTable& atoms) const {
  std::vector<double> sums(atoms.size(), 0.0);
  for (int n = 0; n <= space.n_max(); ++n) {
    const auto& b = blocks[static_cast<std::size_t>(n)];
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      sums[static_cast<std::size_t>(atoms.id_of_tuple(n, static_cast<std::size_t>(i)))] += b[i];
    }
  }
  return sums;
}

DensityGrid density(const FockVector& psi) {
  const double nrm = psi.norm();
  if (std::abs(nrm - 1.0) > 1e-6) {
    throw ValidationError("density requires a normalized state (norm = " + std::to_string(nrm) + ")");
  }
  DensityGrid rho(psi.space());
  for (int n = 0; n <= psi.space().n_max(); ++n) {
    rho.blocks[static_cast<std::size_t>(n)] = psi.space().weight(n) * psi.block(n).cwiseAbs2();
  }
  return rho;
}

double node_floor(const FockVector& psi, int n) {
  const auto& space = psi.space();
  return 1e-12 * psi.sector_mass(n) / static_cast<double>(space.block_size(n));
}

std::vector<double> node_floors(const FockVector& psi) {
  std::vector<double> floors;
  for (int n = 0; n <= psi.space().n_max(); ++n) floors.push_back(node_floor(psi, n));
  return floors;
}

ConfigurationSampler::ConfigurationSampler(const FockVector& psi, bool jitter)
    : space_(psi.space()), jitter_(jitter) {
  const DensityGrid rho = density(psi);
  cumulative_.reserve(space_.dimension());
  double running = 0.0;
  for (const auto& b : rho.blocks) {
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      running += b[i];
      cumulative_.push_back(running);
    }
  }
}

Configuration ConfigurationSampler::operator()(Rng& rng) const {
  const double target = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  // Skip zero-probability entries that share the cumulative value.
  if (it == cumulative_.end()) it = std::prev(it);
  const auto flat = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
  const int n = space_.sector_of(flat);
  std::vector<int> sites(static_cast<std::size_t>(n));
  space_.decode(n, flat - space_.offset(n), sites);

  const auto& grid = space_.grid();
  Configuration q;
  q.positions.reserve(sites.size());
  for (int s : sites) {
    double x = grid.site_position(s);
    if (jitter_) x = grid.wrap_position(x + (rng.uniform() - 0.5) * grid.spacing());
    q.positions.push_back(x);
  }
  return q;
}

Configuration sample_configuration(const FockVector& psi, Rng& rng, bool jitter) {
  return ConfigurationSampler(psi, jitter)(rng);
}

}  // namespace bellqft
