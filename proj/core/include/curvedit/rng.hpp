#pragma once

#include <cstdint>
#include <random>

namespace curvedit {

/// Deterministic random source. Backed by std::mt19937_64, whose output
/// sequence is pinned by the standard, with hand-rolled bounded/real
/// helpers so draws are reproducible across platforms and library
/// versions (std distributions are not portable).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, bound) by rejection; bound > 0.
  std::uint64_t next_below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 bits of randomness.
  double next_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (one value per call; pairs cached).
  double next_normal();

  /// Sample an index from unnormalized nonnegative weights.
  std::size_t sample_discrete(const double* weights, std::size_t n);

private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Stateless 64-bit mix used for content hashes in manifests (FNV-1a).
std::uint64_t fnv1a64(const void* data, std::size_t len);

}  // namespace curvedit
