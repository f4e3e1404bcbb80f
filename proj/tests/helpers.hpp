#pragma once

#include <complex>
#include <random>
#include <vector>

#include "loewner/family.hpp"

namespace loewner::testing {

// Admissible random finite family: 3..8 slits, adjacent gaps in [0.5, 3],
// weights in [0.1, 2]. Deterministic given the engine state.
inline SlitFamily random_family(std::mt19937_64& rng, int min_slits = 3,
                                int max_slits = 8) {
  std::uniform_int_distribution<int> nd(min_slits, max_slits);
  std::uniform_real_distribution<double> gapd(0.5, 3.0);
  std::uniform_real_distribution<double> bd(0.1, 2.0);
  std::uniform_real_distribution<double> startd(-5.0, 0.0);
  const int n = nd(rng);
  double k = startd(rng);
  std::vector<SlitEntry> entries;
  entries.reserve(n);
  for (int i = 0; i < n; ++i) {
    entries.push_back({k, bd(rng)});
    k += gapd(rng);
  }
  return SlitFamily::finite(entries);
}

// Two balanced slits at +-a with weight a^2/8 put a triple zero at the
// origin: P(z) = z^3 / (z^2 - a^2).
inline SlitFamily balanced_pair(double a) {
  return SlitFamily::finite({{-a, a * a / 8.0}, {a, a * a / 8.0}});
}

inline double cdist(std::complex<double> a, std::complex<double> b) {
  return std::abs(a - b);
}

}  // namespace loewner::testing
