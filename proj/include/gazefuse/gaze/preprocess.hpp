#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/gaze/types.hpp"

namespace gazefuse::gaze {

struct PreprocessConfig {
  double blink_gap_ms = 75.0;
  double dispersion_threshold = 0.04;  // normalized units, (max x - min x) + (max y - min y)
  double min_fixation_ms = 80.0;
  double screen_w = 1920.0;
  double screen_h = 1080.0;
};

struct FilterResult {
  std::vector<RawGazeSample> samples;
  // Indices into `samples` where a new segment starts after a long gap.
  std::vector<std::size_t> segment_starts;
};

/// Drops invalid samples. Invalid runs bracketed by valid samples less than
/// `blink_gap_ms` apart are linearly interpolated instead; longer runs
/// become segment boundaries.
inline FilterResult filter_noise(const std::vector<RawGazeSample>& samples, double blink_gap_ms) {
  FilterResult out;
  out.samples.reserve(samples.size());
  std::size_t i = 0;
  const std::size_t n = samples.size();
  std::ptrdiff_t last_valid = -1;
  while (i < n) {
    if (samples[i].valid) {
      out.samples.push_back(samples[i]);
      last_valid = static_cast<std::ptrdiff_t>(i);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !samples[j].valid) ++j;
    // invalid run is [i, j)
    if (last_valid >= 0 && j < n) {
      const auto& a = samples[static_cast<std::size_t>(last_valid)];
      const auto& b = samples[j];
      const double gap = b.t_ms - a.t_ms;
      if (gap < blink_gap_ms && gap > 0) {
        for (std::size_t k = i; k < j; ++k) {
          const double w = (samples[k].t_ms - a.t_ms) / gap;
          out.samples.push_back({samples[k].t_ms, a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), true});
        }
      } else {
        out.segment_starts.push_back(out.samples.size());
      }
    }
    i = j;
  }
  return out;
}

/// Dispersion-threshold (I-DT) fixation identification over time-ordered
/// samples. Coordinates are divided by (x_scale, y_scale) before the
/// dispersion test, so pixel input can use a normalized threshold; output
/// fixations stay in input units.
inline std::vector<Fixation> cluster_fixations(const std::vector<RawGazeSample>& samples, double dispersion_threshold,
                                               double min_duration_ms, double x_scale = 1.0, double y_scale = 1.0) {
  std::vector<Fixation> out;
  const std::size_t n = samples.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && samples[j].t_ms - samples[i].t_ms < min_duration_ms) ++j;
    if (j >= n) break;
    double xmin = samples[i].x, xmax = xmin, ymin = samples[i].y, ymax = ymin;
    for (std::size_t k = i + 1; k <= j; ++k) {
      xmin = std::min(xmin, samples[k].x);
      xmax = std::max(xmax, samples[k].x);
      ymin = std::min(ymin, samples[k].y);
      ymax = std::max(ymax, samples[k].y);
    }
    auto dispersion = [&] { return (xmax - xmin) / x_scale + (ymax - ymin) / y_scale; };
    if (dispersion() > dispersion_threshold) {
      ++i;
      continue;
    }
    while (j + 1 < n) {
      const auto& s = samples[j + 1];
      const double nx0 = std::min(xmin, s.x), nx1 = std::max(xmax, s.x);
      const double ny0 = std::min(ymin, s.y), ny1 = std::max(ymax, s.y);
      if ((nx1 - nx0) / x_scale + (ny1 - ny0) / y_scale > dispersion_threshold) break;
      xmin = nx0, xmax = nx1, ymin = ny0, ymax = ny1;
      ++j;
    }
    double cx = 0.0, cy = 0.0;
    for (std::size_t k = i; k <= j; ++k) {
      cx += samples[k].x;
      cy += samples[k].y;
    }
    const double count = static_cast<double>(j - i + 1);
    out.push_back({cx / count, cy / count, samples[j].t_ms - samples[i].t_ms, samples[i].t_ms});
    i = j + 1;
  }
  return out;
}

/// Divides pixel coordinates by the screen size and clamps into [0,1]^2.
inline ScanPath normalize(ScanPath path, double screen_w, double screen_h) {
  if (!(screen_w > 0) || !(screen_h > 0)) throw ConfigError("screen dimensions must be positive");
  for (auto& f : path.fixations) {
    f.x = std::clamp(f.x / screen_w, 0.0, 1.0);
    f.y = std::clamp(f.y / screen_h, 0.0, 1.0);
  }
  return path;
}

/// filter -> cluster (per segment) -> normalize. Returns fixations only;
/// the caller attaches ids and labels.
inline std::vector<Fixation> preprocess_recording(const std::vector<RawGazeSample>& samples,
                                                  const PreprocessConfig& cfg) {
  const auto filtered = filter_noise(samples, cfg.blink_gap_ms);
  std::vector<std::size_t> bounds{0};
  bounds.insert(bounds.end(), filtered.segment_starts.begin(), filtered.segment_starts.end());
  bounds.push_back(filtered.samples.size());
  ScanPath tmp;
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    std::vector<RawGazeSample> segment(filtered.samples.begin() + static_cast<std::ptrdiff_t>(bounds[s]),
                                       filtered.samples.begin() + static_cast<std::ptrdiff_t>(bounds[s + 1]));
    auto fixes = cluster_fixations(segment, cfg.dispersion_threshold, cfg.min_fixation_ms, cfg.screen_w, cfg.screen_h);
    tmp.fixations.insert(tmp.fixations.end(), fixes.begin(), fixes.end());
  }
  return normalize(std::move(tmp), cfg.screen_w, cfg.screen_h).fixations;
}

}  // namespace gazefuse::gaze
