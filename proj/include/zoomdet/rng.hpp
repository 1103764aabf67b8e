#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace zoomdet {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates nearby (seed, stream) pairs.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent generator for sub-stream `stream` of `seed` (e.g. one per image
// or per frame id). Results do not depend on how many other streams exist.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL)));
}

inline double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double log_uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline double gaussian(Rng& rng, double sigma) {
  return std::normal_distribution<double>(0.0, 1.0)(rng) * sigma;
}

}  // namespace zoomdet
