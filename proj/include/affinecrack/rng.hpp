#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace affinecrack {

// Deterministic random stream: a std::mt19937_64 core (its output sequence is
// pinned by the C++ standard) with the bounded/real/normal sampling layered on
// top implemented here, so the whole stream is reproducible from a seed.
// Matches manifest algorithm id "mt19937_64/afc-v1".
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent child stream from (seed, index). splitmix64
  // finalization decorrelates adjacent indices.
  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, bound) by rejection on the top remainder range.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  // 53-bit uniform in [0, 1).
  double unit_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Box-Muller; consumes two uniforms per pair, caches the spare.
  double normal(double mean, double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + spare_ * stddev;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double angle = unit_real() * two_pi;
    const double radius = std::sqrt(-2.0 * std::log(1.0 - unit_real()));
    spare_ = std::sin(angle) * radius;
    has_spare_ = true;
    return mean + std::cos(angle) * radius * stddev;
  }

  // Fisher-Yates, descending index.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace affinecrack
