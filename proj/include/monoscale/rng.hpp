#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace monoscale {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/**
 * A named, seeded random stream.
 *
 * Streams are keyed by (parent seed, index, purpose label), so adding a new
 * consumer never shifts the draws seen by existing ones. Uniform variates are
 * built directly from the 64-bit engine output rather than through
 * std::uniform_real_distribution, whose algorithm is implementation-defined;
 * this keeps sampled sequences identical across standard libraries.
 */
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static Stream derive(std::uint64_t parent, std::uint64_t index, std::string_view label) {
    std::uint64_t s = detail::splitmix64(parent ^ detail::splitmix64(detail::fnv1a(label)));
    s = detail::splitmix64(s ^ detail::splitmix64(index + 0x632be59bd9b4e019ULL));
    return Stream(s);
  }

  Stream substream(std::uint64_t index, std::string_view label = "") const {
    return derive(seed_, index, label);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  /// Inverse-CDF draw from nonnegative weights (need not be normalized).
  /// Zero-weight entries are never returned. Consumes exactly one variate.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last_positive = i;
      if (u < acc) return i;
    }
    return last_positive;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace monoscale
