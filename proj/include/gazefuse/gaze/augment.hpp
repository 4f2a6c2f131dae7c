#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/gaze/types.hpp"
#include "gazefuse/rng.hpp"

namespace gazefuse::gaze {

/// Isotropic Gaussian jitter on normalized fixation coordinates, re-clamped
/// to the unit square. Durations, onsets and labels are untouched.
inline ScanPath jitter_augment(ScanPath path, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("jitter sigma must be nonnegative");
  if (sigma == 0.0) return path;
  for (auto& f : path.fixations) {
    f.x = std::clamp(f.x + rng.normal(0.0, sigma), 0.0, 1.0);
    f.y = std::clamp(f.y + rng.normal(0.0, sigma), 0.0, 1.0);
  }
  return path;
}

/// Duration-weighted Gaussian density of fixations evaluated at cell
/// centres, normalized to sum 1. Accumulated in log space so very narrow
/// bandwidths still resolve to the nearest cells instead of underflowing.
inline SaliencyMap synth_heatmap(const ScanPath& path, std::size_t grid_h, std::size_t grid_w, double bandwidth) {
  if (grid_h == 0 || grid_w == 0) throw ConfigError("heatmap grid dimensions must be at least 1");
  if (!(bandwidth > 0.0)) throw ConfigError("heatmap bandwidth must be positive");
  if (path.fixations.empty()) throw InsufficientDataError("heatmap of an empty scanpath is undefined");

  SaliencyMap map{grid_h, grid_w, std::vector<double>(grid_h * grid_w)};
  const double inv2b2 = 1.0 / (2.0 * bandwidth * bandwidth);
  double global_max = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(path.fixations.size());
  for (std::size_t r = 0; r < grid_h; ++r) {
    const double cy = (static_cast<double>(r) + 0.5) / static_cast<double>(grid_h);
    for (std::size_t c = 0; c < grid_w; ++c) {
      const double cx = (static_cast<double>(c) + 0.5) / static_cast<double>(grid_w);
      double local_max = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < path.fixations.size(); ++k) {
        const auto& f = path.fixations[k];
        const double d2 = (f.x - cx) * (f.x - cx) + (f.y - cy) * (f.y - cy);
        terms[k] = std::log(f.duration_ms) - d2 * inv2b2;
        local_max = std::max(local_max, terms[k]);
      }
      double s = 0.0;
      for (double t : terms) s += std::exp(t - local_max);
      const double logd = local_max + std::log(s);
      map.grid[r * grid_w + c] = logd;
      global_max = std::max(global_max, logd);
    }
  }
  double total = 0.0;
  for (auto& v : map.grid) {
    v = std::exp(v - global_max);
    total += v;
  }
  for (auto& v : map.grid) v /= total;
  return map;
}

}  // namespace gazefuse::gaze
