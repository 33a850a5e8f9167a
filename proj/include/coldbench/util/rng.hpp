#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace coldbench {

/// Derives a child seed from a parent seed and a stream name:
///   splitmix64(parent ^ fnv1a64(name))
/// Every random decision in the harness hangs off a named child stream, so
/// results do not depend on evaluation order or thread scheduling.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view name) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seedable generator with a fully specified output sequence.
///
/// The engine is std::mt19937_64, whose output is fixed by the C++ standard.
/// Standard distributions are implementation-defined, so bounded integers use
/// rejection sampling on the raw 64-bit output and shuffles are Fisher-Yates
/// driven by below(). Any implementation following these two rules reproduces
/// suites bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Uniform real in [0, 1) with 53 bits of precision.
  double uniform();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

  /// Uniform sample of k elements without replacement. The result is in
  /// sampled order (a prefix of a Fisher-Yates pass over a copy of pool).
  template <typename T>
  std::vector<T> sample(std::vector<T> pool, std::size_t k) {
    if (k > pool.size()) k = pool.size();
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace coldbench
