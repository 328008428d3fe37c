#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace styleshift {

/// 64-bit FNV-1a, used for content hashes and seed derivation. Stable across
/// platforms and releases.
class Fnv1a {
 public:
  Fnv1a& add(std::span<const std::uint8_t> bytes);
  Fnv1a& add(std::string_view text);
  Fnv1a& add(std::uint64_t value);
  Fnv1a& add(double value);
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent seed for a named component from a master seed.
/// Every argument participates in the hash, so changing any of them yields
/// an unrelated stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index = 0);
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::string_view key, std::uint64_t index = 0);

std::string hex64(std::uint64_t value);

/// Seeded random source. Distributions are implemented here rather than with
/// <random>'s distribution classes, whose output is implementation-defined;
/// this keeps sampled values identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), unbiased.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  std::uint64_t poisson(double lambda);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = uniform_int(i);
      std::swap(values[i - 1], values[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace styleshift
