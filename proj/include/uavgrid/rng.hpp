#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace uavgrid {

// splitmix64 finalizer; scrambles derived seeds so nearby inputs give
// unrelated streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive a subsystem seed from a parent seed and a label. Every random
/// stream in the toolkit is rooted in the single run seed through this
/// function, so runs are reproducible end to end.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a offset basis
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix64(parent ^ h);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                    std::uint64_t index) {
  return mix64(derive_seed(parent, label) ^ mix64(index + 0x51ed2701));
}

/// mt19937_64 with hand-rolled variate transforms. The standard
/// distributions are implementation-defined, so sampling through them would
/// make traces differ across stdlibs; these transforms are pinned.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform on [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // lo > 0
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // inclusive bounds; rejection-free modulo is fine at our span sizes
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Knuth multiplication method; mean stays small everywhere we sample.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    double prod = 1.0;
    int k = -1;
    do {
      ++k;
      prod *= uniform();
    } while (prod > limit);
    return k;
  }

  std::mt19937_64& engine() { return engine_; }
  const std::mt19937_64& engine() const { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace uavgrid
