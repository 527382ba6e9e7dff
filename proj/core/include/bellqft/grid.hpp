#pragma once

#include <cstddef>
#include <vector>

namespace bellqft {

/// One-dimensional periodic lattice with sites x_k = k * a, k = 0..N-1.
class GridSpec {
 public:
  GridSpec(double length, int n_sites);

  double length() const { return length_; }
  int n_sites() const { return n_sites_; }
  double spacing() const { return length_ / n_sites_; }

  double site_position(int k) const { return wrap(k) * spacing(); }

  /// Site index modulo N, always in [0, N).
  int wrap(long k) const {
    const long n = n_sites_;
    const long r = k % n;
    return static_cast<int>(r < 0 ? r + n : r);
  }

  /// Position modulo L, in [0, L).
  double wrap_position(double x) const;

  /// Nearest lattice site of a continuum position (cells are centred on sites).
  int nearest_site(double x) const;

  /// Minimal-image signed displacement to - from, in (-L/2, L/2].
  double displacement(double from, double to) const;

  bool operator==(const GridSpec&) const = default;

 private:
  double length_;
  int n_sites_;
};

/// Particle positions of the actual configuration Q(t). The sector is the
/// particle count; order carries no meaning.
struct Configuration {
  std::vector<double> positions;

  std::size_t sector() const { return positions.size(); }
  bool operator==(const Configuration&) const = default;
};

}  // namespace bellqft
