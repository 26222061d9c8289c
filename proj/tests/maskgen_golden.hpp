#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "fegan/maskgen.hpp"

namespace fegan::testing {

// Recorded by a reference run: seed 20261014, 10,000 masks at 64x64 with
// defaults_for(64, 64) and synthetic landmarks. Percentiles are the sorted
// sample at index floor(q * n).
inline constexpr std::uint64_t kCoverageSeed = 20261014;
inline constexpr int kCoverageSamples = 10000;
inline constexpr double kCoverageMean = 0.1035685303;
inline constexpr double kCoverageP5 = 0.0;
inline constexpr double kCoverageP95 = 0.2624511719;

struct CoverageStats {
  double mean = 0;
  double p5 = 0;
  double p95 = 0;
};

inline CoverageStats measure_coverage(std::uint64_t seed = kCoverageSeed, int samples = kCoverageSamples) {
  using namespace fegan::maskgen;
  const Landmarks lm = synthetic_landmarks(64, 64);
  const MaskGenParams p = MaskGenParams::defaults_for(64, 64);
  Rng rng(seed);
  std::vector<double> cov;
  cov.reserve(static_cast<std::size_t>(samples));
  double sum = 0;
  for (int i = 0; i < samples; ++i) {
    cov.push_back(generate_free_form_mask(rng, 64, 64, lm, p).coverage());
    sum += cov.back();
  }
  std::sort(cov.begin(), cov.end());
  return {sum / samples, cov[static_cast<std::size_t>(0.05 * samples)], cov[static_cast<std::size_t>(0.95 * samples)]};
}

/// Within +-tol relative; a zero reference must be matched exactly.
inline bool within_relative(double value, double reference, double tol) {
  if (reference == 0.0) return value == 0.0;
  return std::abs(value - reference) <= tol * std::abs(reference);
}

}  // namespace fegan::testing
