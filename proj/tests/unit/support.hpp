#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "bellqft/fock.hpp"
#include "bellqft/model.hpp"

namespace bellqft::test {

inline ModelSpec small_model(int n_sites = 8, int n_max = 2, double coupling = 1.0, double length = 8.0) {
  ModelSpec spec{GridSpec(length, n_sites)};
  spec.n_max = n_max;
  spec.coupling = coupling;
  return spec;
}

inline Eigen::MatrixXcd dense(const SparseOperator& op) { return Eigen::MatrixXcd(op); }

inline double max_abs(const Eigen::MatrixXcd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Binomial bound: |k/M - p| should stay below z standard errors.
inline double binomial_tolerance(double p, double count, double z = 5.0) {
  return z * std::sqrt(std::max(p * (1.0 - p), 1e-12) / count) + 1.0 / count;
}

/// Normalized indicator of one atom's orderings in orthonormal coordinates.
inline Eigen::VectorXcd orbit_vector(const AtomTable& atoms, std::size_t id) {
  const auto& space = atoms.space();
  const Atom& atom = atoms[id];
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dimension()));
  std::vector<int> tuple(static_cast<std::size_t>(atom.sector));
  for (std::size_t j = 0; j < space.block_size(atom.sector); ++j) {
    space.decode(atom.sector, j, tuple);
    if (atoms.id_of_tuple(atom.sector, j) == static_cast<int>(id)) {
      e[static_cast<Eigen::Index>(space.offset(atom.sector) + j)] = 1.0;
    }
  }
  e.normalize();
  return e;
}

}  // namespace bellqft::test
