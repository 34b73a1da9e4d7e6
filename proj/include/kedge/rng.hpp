#pragma once

#include <cstdint>

namespace kedge {

// splitmix64 bit mixer; the basis of all counter-keyed randomness here.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix(uint64_t a, uint64_t b) { return splitmix64(splitmix64(a) ^ b); }
inline uint64_t mix(uint64_t a, uint64_t b, uint64_t c) { return mix(mix(a, b), c); }
inline uint64_t mix(uint64_t a, uint64_t b, uint64_t c, uint64_t d) { return mix(mix(a, b, c), d); }

// Uniform in [0,1) with 53 significant bits.
inline double unit_real(uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Inverse-CDF sampling blows up at u in {0,1}; draws are squeezed into
// (eps, 1-eps) instead.
inline constexpr double kUniformEps = 1e-6;

// Per-gate noise keyed by (seed, step, stream, index): the draw for one edge
// never depends on sampling order or on any other random stream.
inline double counter_uniform(uint64_t seed, uint64_t step, uint64_t stream, uint64_t index) {
  const double u = unit_real(mix(seed, step, stream, index));
  return kUniformEps + (1.0 - 2.0 * kUniformEps) * u;
}

}  // namespace kedge
