#include "bellqft/grid.hpp"

#include <cmath>

#include "bellqft/error.hpp"

namespace bellqft {

GridSpec::GridSpec(double length, int n_sites) : length_(length), n_sites_(n_sites) {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw ValidationError("grid.length must be a positive finite number");
  }
  if (n_sites < 3 || n_sites > 64) {
    throw ValidationError("grid.n_sites must lie in [3, 64]");
  }
}

double GridSpec::wrap_position(double x) const {
  double r = std::fmod(x, length_);
  if (r < 0.0) r += length_;
  // fmod of a tiny negative number can round up to exactly L
  if (r >= length_) r = 0.0;
  return r;
}

int GridSpec::nearest_site(double x) const {
  return wrap(static_cast<long>(std::floor(wrap_position(x) / spacing() + 0.5)));
}

double GridSpec::displacement(double from, double to) const {
  double d = std::fmod(to - from, length_);
  if (d > 0.5 * length_) d -= length_;
  if (d <= -0.5 * length_) d += length_;
  return d;
}

}  // namespace bellqft
