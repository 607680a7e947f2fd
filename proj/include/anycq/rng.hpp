#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace anycq {

using Rng = std::mt19937_64;

// Uniform in [0,1). Hand-rolled from raw engine output so results do not
// depend on the standard library's distribution implementation.
inline double uniform_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Rejection-free modulo is fine here: n is far
// below 2^64 in every use, the bias is negligible, but we still reject to
// keep draws exactly uniform.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Derive an independent stream for a work item; used by parallel evaluation
// so results do not depend on the worker count.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{seed, index ^ std::uint64_t{0x9e3779b97f4a7c15}};
  return Rng(seq);
}

// Sample an index from unnormalized non-negative weights.
inline std::size_t weighted_index(Rng& rng, const std::vector<double>& w) {
  double total = 0;
  for (double x : w) total += x;
  double u = uniform_double(rng) * total;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    u -= w[i];
    if (u < 0) return i;
  }
  return w.empty() ? 0 : w.size() - 1;
}

}  // namespace anycq
