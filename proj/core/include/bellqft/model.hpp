#pragma once

#include <optional>
#include <vector>

#include "bellqft/fock.hpp"

namespace bellqft {

enum class ModelMode { SchrodingerFock, Dirac1p };

struct FormFactorSpec {
  enum class Shape { Gaussian, Point };

  Shape shape = Shape::Gaussian;
  std::optional<double> width;   // default 2a
  std::optional<double> center;  // default L/2
};

struct DiracParams {
  double mass = 0.0;
  double c = 1.0;
};

/// Lattice bosons with H = H0 + H_I:
///   H0  = second quantization of -(hbar^2 / 2m) Laplacian (3-point, periodic),
///   H_I = g (a(phi) + a^dagger(phi)), a fixed recoilless source smeared by phi.
struct ModelSpec {
  explicit ModelSpec(GridSpec grid) : grid(grid) {}

  GridSpec grid;
  int n_max = 2;
  double mass = 1.0;
  double hbar = 1.0;
  double coupling = 0.0;
  FormFactorSpec form_factor;
  ModelMode mode = ModelMode::SchrodingerFock;
  DiracParams dirac;

  /// Throws ValidationError naming the offending key.
  void validate() const;

  FockSpace space() const { return FockSpace(grid, n_max); }

  /// Nearest-neighbour hopping amplitude hbar^2 / (2 m a^2).
  double hopping() const;

  /// phi(k), real and normalized so that a * sum_k phi(k)^2 = 1.
  std::vector<double> form_factor_values() const;
};

/// Sector blocks of H in orthonormal tensor coordinates plus the assembled
/// full-space operators.
struct OperatorBlocks {
  explicit OperatorBlocks(FockSpace space);

  FockSpace space;
  double hbar = 1.0;
  std::vector<SparseOperator> h0_blocks;        // sector n -> n
  std::vector<SparseOperator> creation_blocks;  // sector n -> n+1 part of H_I
  SparseOperator h0;
  SparseOperator h_interaction;
  SparseOperator total;

  /// Largest |H - H^dagger| entry of the assembled operator.
  double hermiticity_defect() const;
};

/// One-particle kinetic matrix on the grid.
SparseOperator one_particle_kinetic(const ModelSpec& spec);

OperatorBlocks build_h0(const ModelSpec& spec);
OperatorBlocks build_hI(const ModelSpec& spec);
/// Both parts, assembled.
OperatorBlocks build_operators(const ModelSpec& spec);

/// a^dagger(f) = sum_k sqrt(a) f(k) b_k^dagger for a real profile f over sites.
SparseOperator smeared_creation(const FockSpace& space, std::span<const double> profile);

/// H = c alpha p + beta m c^2 on two-component spinors, alpha = sigma_x,
/// beta = sigma_z, p the central-difference momentum. Index 2k + s.
SparseOperator build_dirac(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Initial states

struct PacketSpec {
  int sector = 1;
  double center = 0.0;
  double width = 1.0;
  double momentum = 0.0;
  cplx amplitude{1.0, 0.0};
};

/// Superposition of the vacuum and symmetric product Gaussian packets. Each
/// packet block is normalized before scaling by its amplitude; the total is
/// then normalized.
struct InitialStateSpec {
  cplx vacuum_amplitude{1.0, 0.0};
  std::vector<PacketSpec> packets;
};

FockVector build_initial_state(const ModelSpec& spec, const InitialStateSpec& init);

struct SpinorStateSpec {
  cplx upper{1.0, 0.0};
  cplx lower{0.0, 0.0};
  bool uniform = true;
  double center = 0.0;
  double width = 1.0;
  double momentum = 0.0;
};

/// Euclidean-normalized spinor wavefunction, index 2k + s.
Eigen::VectorXcd build_spinor_state(const ModelSpec& spec, const SpinorStateSpec& init);

}  // namespace bellqft
