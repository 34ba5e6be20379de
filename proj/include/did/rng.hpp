#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Deterministic sampling helpers. std::mt19937_64 output is fully specified
// by the standard; the std::* distributions are not, so every draw goes
// through these helpers to keep artifacts bit-reproducible.
namespace did::rng {

using Engine = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_real(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Engine& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform_real(eng);
}

/// Uniform integer in [0, n). n must be > 0.
inline std::uint64_t uniform_int(Engine& eng, std::uint64_t n) {
  // rejection sampling on the top bits, unbiased
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_int(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

/// Exponential with the given mean, for inter-arrival style timing.
inline double exponential(Engine& eng, double mean) {
  double u = uniform_real(eng);
  if (u >= 1.0) u = 0.9999999999;
  return -mean * std::log(1.0 - u);
}

}  // namespace did::rng
