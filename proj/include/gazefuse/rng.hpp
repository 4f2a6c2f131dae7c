#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace gazefuse {

/// Counter-based, splittable random stream.
///
/// Each draw is a pure function of (key, counter), so a stream can be
/// re-derived anywhere from its key. `split` derives an independent child
/// stream; children derived with the same label from the same parent are
/// identical, which is what makes per-subject generation order-independent.
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t hash(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  Rng split(std::uint64_t index) const { return from_key(mix(key_ ^ mix(index + 0x51ed270b27ULL))); }
  Rng split(std::string_view label) const { return split(hash(label)); }
  Rng split(std::string_view label, std::uint64_t index) const { return split(label).split(index); }

  std::uint64_t next_u64() { return mix(key_ + mix(counter_++)); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }

 private:
  static Rng from_key(std::uint64_t key) {
    Rng r;
    r.key_ = key;
    return r;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle driven by an Rng stream.
template <typename Range>
void shuffle(Range& range, Rng& rng) {
  using std::swap;
  const auto n = static_cast<std::uint64_t>(std::size(range));
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    swap(range[i - 1], range[j]);
  }
}

}  // namespace gazefuse
