#ifndef ADINF_RNG_HPP
#define ADINF_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "adinf/errors.hpp"

namespace adinf {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (splitmix64(b) + 0x9E3779B97F4A7C15ULL));
}

// 53-bit mantissa in (0,1); the half-ulp offset keeps log() finite.
inline double u64_to_unit(std::uint64_t v) {
  return static_cast<double>(v >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Stateless keyed normal draw so population tables are reproducible no
// matter what order units are generated in.
inline double keyed_normal(std::uint64_t seed, std::uint64_t unit,
                           std::uint64_t stream) {
  const std::uint64_t k = mix_keys(mix_keys(seed, unit), stream);
  const double u1 = u64_to_unit(splitmix64(k));
  const double u2 = u64_to_unit(splitmix64(k + 0x632BE59BD9B4E019ULL));
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

// Sequential stream for simulation draws. SplitMix64 is a full-period
// generator over the counter; good enough statistically for assignment
// sampling and fully portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : state_(mix_keys(seed, stream)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  double uniform01() { return u64_to_unit(next_u64()); }

  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Index draw from an explicit probability vector by CDF walk.
  int categorical(const std::vector<double>& probs) {
    if (probs.empty()) throw numeric_error("categorical: empty distribution");
    const double u = uniform01();
    double cum = 0.0;
    for (size_t k = 0; k + 1 < probs.size(); ++k) {
      cum += probs[k];
      if (u < cum) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::uint64_t state_;
};

}  // namespace adinf

#endif
