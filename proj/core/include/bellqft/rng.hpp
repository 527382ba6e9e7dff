#pragma once

#include <cstdint>
#include <random>

namespace bellqft {

/// SplitMix64 finaliser; used to derive decorrelated per-trajectory seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of trajectory `index` in an ensemble rooted at `root_seed`.
constexpr std::uint64_t stream_seed(std::uint64_t root_seed, std::uint64_t index) {
  return splitmix64(splitmix64(root_seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Deterministic random source. mt19937_64 output is fixed by the standard, and
/// doubles are formed from the top 53 bits, so streams are bit-identical
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace bellqft
