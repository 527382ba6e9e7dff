#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bellqft/grid.hpp"
#include "bellqft/rng.hpp"

namespace bellqft {

using cplx = std::complex<double>;
using SparseOperator = Eigen::SparseMatrix<cplx>;

/// Truncated bosonic Fock space over a periodic grid.
///
/// Sector n is stored on the full tensor grid (N^n ordered tuples, row-major,
/// first coordinate slowest). The inner product is
///
///   <Phi, Psi> = sum_n a^n / n! sum_{tuples} conj(Phi_n) Psi_n,
///
/// where the 1/n! removes the double counting of permuted tuples. Operators
/// are represented in "orthonormal tensor coordinates" u_n = sqrt(a^n/n!) Psi_n,
/// in which the inner product is the plain Euclidean one.
class FockSpace {
 public:
  FockSpace(GridSpec grid, int n_max);

  const GridSpec& grid() const { return grid_; }
  int n_max() const { return n_max_; }
  int n_sites() const { return grid_.n_sites(); }
  int sector_count() const { return n_max_ + 1; }

  std::size_t block_size(int n) const { return block_sizes_[static_cast<std::size_t>(n)]; }
  std::size_t offset(int n) const { return offsets_[static_cast<std::size_t>(n)]; }
  std::size_t dimension() const { return offsets_.back(); }

  /// Measure weight a^n / n! of a single ordered tuple in sector n.
  double weight(int n) const { return weights_[static_cast<std::size_t>(n)]; }

  std::size_t encode(std::span<const int> sites) const;
  void decode(int n, std::size_t index, std::span<int> sites) const;

  /// Sector of a flat (concatenated) index.
  int sector_of(std::size_t flat) const;

  bool operator==(const FockSpace& other) const {
    return grid_ == other.grid_ && n_max_ == other.n_max_;
  }

 private:
  GridSpec grid_;
  int n_max_;
  std::vector<std::size_t> block_sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> weights_;
};

/// An unordered grid configuration: a multiset of sites. These are the atoms
/// of the discrete configuration space and the support of the PV measure.
struct Atom {
  int sector = 0;
  std::vector<int> sites;          // sorted, non-decreasing
  std::size_t block_index = 0;     // row-major index of the sorted tuple
  double multiplicity = 1.0;       // n! / prod_k n_k!  (number of orderings)

  int occupation(int site) const;
};

/// Enumeration of all atoms of a FockSpace with O(1) lookup from ordered tuples.
class AtomTable {
 public:
  explicit AtomTable(const FockSpace& space);

  const FockSpace& space() const { return space_; }
  std::size_t size() const { return atoms_.size(); }
  const Atom& operator[](std::size_t id) const { return atoms_[id]; }

  /// Atom ids of sector n occupy [first, last).
  std::size_t sector_begin(int n) const { return sector_begin_[static_cast<std::size_t>(n)]; }
  std::size_t sector_end(int n) const { return sector_begin_[static_cast<std::size_t>(n) + 1]; }

  int id_of_tuple(int n, std::size_t block_index) const {
    return id_by_tuple_[static_cast<std::size_t>(n)][block_index];
  }
  /// Atom of an arbitrary site list (any order); -1 when the sector exceeds n_max.
  int id_of_sites(std::span<const int> sites) const;
  /// Atom of a continuum configuration after snapping each position to its site.
  int id_of(const Configuration& q) const;

  Configuration configuration(std::size_t id) const;

 private:
  FockSpace space_;
  std::vector<Atom> atoms_;
  std::vector<std::size_t> sector_begin_;
  std::vector<std::vector<int>> id_by_tuple_;
};

/// Psi as a function on configuration space: one complex block per sector.
class FockVector {
 public:
  explicit FockVector(FockSpace space);

  static FockVector vacuum(const FockSpace& space);
  static FockVector from_orthonormal(const FockSpace& space, const Eigen::VectorXcd& u);

  const FockSpace& space() const { return space_; }
  const GridSpec& grid() const { return space_.grid(); }

  Eigen::VectorXcd& block(int n) { return blocks_[static_cast<std::size_t>(n)]; }
  const Eigen::VectorXcd& block(int n) const { return blocks_[static_cast<std::size_t>(n)]; }

  cplx at(int n, std::size_t index) const { return blocks_[static_cast<std::size_t>(n)][static_cast<Eigen::Index>(index)]; }
  cplx at(const Atom& atom) const { return at(atom.sector, atom.block_index); }

  Eigen::VectorXcd to_orthonormal() const;

  double norm_squared() const;
  double norm() const;
  double sector_mass(int n) const;
  void normalize();

  /// Largest |Psi(t) - Psi(pi t)| over transpositions pi, relative to max |Psi_n|.
  double symmetry_defect(int n) const;

  FockVector& operator*=(cplx s);

 private:
  FockSpace space_;
  std::vector<Eigen::VectorXcd> blocks_;
};

cplx inner_product(const FockVector& lhs, const FockVector& rhs);

/// Real per-tuple field over the sector grids: probabilities w_n |Psi_n|^2 for
/// a density, or signed values for density rates.
struct SectorField {
  explicit SectorField(FockSpace space);

  FockSpace space;
  std::vector<Eigen::VectorXd> blocks;

  double total() const;
  double sector_sum(int n) const;
  /// Sum over the orderings of each atom.
  std::vector<double> atom_sums(const AtomTable& atoms) const;
};

using DensityGrid = SectorField;

/// Per-tuple probabilities; throws ValidationError if | ||psi|| - 1 | > 1e-6.
DensityGrid density(const FockVector& psi);

/// Node threshold of sector n: 1e-12 times the sector's mean tuple probability.
double node_floor(const FockVector& psi, int n);
/// node_floor for every sector.
std::vector<double> node_floors(const FockVector& psi);

/// Draws configurations from |Psi|^2: sector by mass, then a tuple within it.
/// With jitter, positions are spread uniformly over the site's cell.
class ConfigurationSampler {
 public:
  explicit ConfigurationSampler(const FockVector& psi, bool jitter = false);

  Configuration operator()(Rng& rng) const;

 private:
  FockSpace space_;
  bool jitter_;
  std::vector<double> cumulative_;  // over the flat tensor index
};

Configuration sample_configuration(const FockVector& psi, Rng& rng, bool jitter = false);

// ---------------------------------------------------------------------------
// Ladder operators, number operators and the PV measure. All operators act in
// orthonormal tensor coordinates.

/// b_k^dagger: sector n -> n+1, (b^dagger u)(t) = (n+1)^{-1/2} sum_i [t_i = k] u(t without i).
/// The top sector is mapped to zero (truncation).
SparseOperator creation_operator(const FockSpace& space, int site);
SparseOperator annihilation_operator(const FockSpace& space, int site);

/// Normalized bosonic state with independent standard complex normal
/// amplitudes per tuple, symmetrized.
FockVector random_state(const FockSpace& space, Rng& rng);

/// N(R) = sum_{k in R} b_k^dagger b_k.
SparseOperator number_operator(const FockSpace& space, std::span<const int> region);

/// Diagonal operator whose value at a tuple counts its coordinates in R.
SparseOperator count_operator(const FockSpace& space, std::span<const int> region);

/// Orthogonal projector onto the bosonic (permutation-symmetric) subspace.
SparseOperator symmetrizer(const FockSpace& space);

/// A set of grid configurations B, given per sector as a tuple mask.
class ConfigRegion {
 public:
  explicit ConfigRegion(const FockSpace& space, bool filled = false);

  static ConfigRegion everything(const FockSpace& space) { return ConfigRegion(space, true); }
  static ConfigRegion nothing(const FockSpace& space) { return ConfigRegion(space, false); }
  /// All orderings of one atom.
  static ConfigRegion of_atom(const AtomTable& atoms, std::size_t id);

  void insert(int n, std::size_t block_index) { mask_[static_cast<std::size_t>(n)][block_index] = 1; }
  bool contains(int n, std::size_t block_index) const { return mask_[static_cast<std::size_t>(n)][block_index] != 0; }
  const FockSpace& space() const { return space_; }

 private:
  FockSpace space_;
  std::vector<std::vector<char>> mask_;
};

/// P(B): multiplication by the indicator of B.
FockVector pv_project(const FockVector& psi, const ConfigRegion& region);
Eigen::VectorXcd pv_project(const Eigen::VectorXcd& u, const ConfigRegion& region);

struct PvCheck {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  std::string detail;
};

struct PvConsistencyReport {
  std::vector<PvCheck> checks;

  bool passed() const;
  const PvCheck* failure() const;
};

/// Dense verification that the ladder-built number operators form a PV
/// measure. Each check is listed by name in the report.
/// Throws DimensionError above total dimension 5000.
PvConsistencyReport verify_pv_consistency(const GridSpec& grid, int n_max,
                                          const std::vector<std::vector<int>>& regions);
PvConsistencyReport verify_pv_consistency(const GridSpec& grid, int n_max);

}  // namespace bellqft
