#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/gaze/scanpath_io.hpp"
#include "gazefuse/gaze/types.hpp"

namespace gazefuse::features {

using gaze::ScanPath;

/// Uniform rows x cols tiling of the unit square. Points on the right or
/// bottom edge (x == 1 or y == 1) belong to the last tile.
struct RegionGrid {
  std::size_t rows = 4;
  std::size_t cols = 4;

  std::size_t regions() const { return rows * cols; }

  std::size_t region_of(double x, double y) const {
    const auto c = std::min(static_cast<std::size_t>(std::max(0.0, x) * static_cast<double>(cols)), cols - 1);
    const auto r = std::min(static_cast<std::size_t>(std::max(0.0, y) * static_cast<double>(rows)), rows - 1);
    return r * cols + c;
  }
};

enum class UnvisitedRowPolicy { uniform, zero };

inline UnvisitedRowPolicy parse_policy(std::string_view s) {
  if (s == "uniform") return UnvisitedRowPolicy::uniform;
  if (s == "zero") return UnvisitedRowPolicy::zero;
  throw ConfigError("unknown unvisited-row policy '" + std::string(s) + "'");
}

inline const char* policy_name(UnvisitedRowPolicy p) { return p == UnvisitedRowPolicy::uniform ? "uniform" : "zero"; }

struct TransitionMatrix {
  std::size_t regions = 0;
  std::vector<std::size_t> counts;  // R x R
  std::vector<double> probs;        // R x R
  std::vector<bool> visited;        // row had at least one outgoing transition

  std::size_t count(std::size_t i, std::size_t j) const { return counts[i * regions + j]; }
  double prob(std::size_t i, std::size_t j) const { return probs[i * regions + j]; }
};

inline std::vector<std::size_t> region_sequence(const ScanPath& path, const RegionGrid& grid) {
  std::vector<std::size_t> seq;
  seq.reserve(path.fixations.size());
  for (const auto& f : path.fixations) seq.push_back(grid.region_of(f.x, f.y));
  return seq;
}

/// Row-normalized counts of consecutive region pairs, self-transitions
/// included. Rows with no outgoing transitions are either filled with 1/R
/// (uniform) or left at zero with `visited[i] == false` (zero).
inline TransitionMatrix transition_matrix(std::span<const std::size_t> regions, std::size_t R,
                                          UnvisitedRowPolicy policy = UnvisitedRowPolicy::uniform) {
  if (regions.size() < 2) throw InsufficientDataError("transition matrix needs at least 2 fixations");
  TransitionMatrix tm{R, std::vector<std::size_t>(R * R, 0), std::vector<double>(R * R, 0.0), std::vector<bool>(R, false)};
  for (std::size_t k = 0; k + 1 < regions.size(); ++k) {
    if (regions[k] >= R || regions[k + 1] >= R) throw ConfigError("region index out of range");
    ++tm.counts[regions[k] * R + regions[k + 1]];
  }
  for (std::size_t i = 0; i < R; ++i) {
    std::size_t total = 0;
    for (std::size_t j = 0; j < R; ++j) total += tm.counts[i * R + j];
    if (total > 0) {
      tm.visited[i] = true;
      for (std::size_t j = 0; j < R; ++j) {
        tm.probs[i * R + j] = static_cast<double>(tm.counts[i * R + j]) / static_cast<double>(total);
      }
    } else if (policy == UnvisitedRowPolicy::uniform) {
      for (std::size_t j = 0; j < R; ++j) tm.probs[i * R + j] = 1.0 / static_cast<double>(R);
    }
  }
  return tm;
}

inline TransitionMatrix transition_matrix(const ScanPath& path, const RegionGrid& grid,
                                          UnvisitedRowPolicy policy = UnvisitedRowPolicy::uniform) {
  const auto seq = region_sequence(path, grid);
  return transition_matrix(seq, grid.regions(), policy);
}

struct SpatialStats {
  double mean_fixation_ms = 0.0;
  double std_fixation_ms = 0.0;
  double mean_saccade_amplitude = 0.0;
  double max_saccade_amplitude = 0.0;
  double dispersion = 0.0;
};

/// Fixation duration moments (population std), Euclidean saccade
/// amplitudes, and RMS distance of fixations from their centroid.
inline SpatialStats spatial_stats(const ScanPath& path) {
  const auto& fx = path.fixations;
  if (fx.size() < 2) throw InsufficientDataError("spatial statistics need at least 2 fixations");
  const double n = static_cast<double>(fx.size());
  SpatialStats s;
  double cx = 0.0, cy = 0.0;
  for (const auto& f : fx) {
    s.mean_fixation_ms += f.duration_ms / n;
    cx += f.x / n;
    cy += f.y / n;
  }
  double var = 0.0, disp = 0.0;
  for (const auto& f : fx) {
    var += (f.duration_ms - s.mean_fixation_ms) * (f.duration_ms - s.mean_fixation_ms) / n;
    disp += ((f.x - cx) * (f.x - cx) + (f.y - cy) * (f.y - cy)) / n;
  }
  s.std_fixation_ms = std::sqrt(var);
  s.dispersion = std::sqrt(disp);
  for (std::size_t k = 0; k + 1 < fx.size(); ++k) {
    const double amp = std::hypot(fx[k + 1].x - fx[k].x, fx[k + 1].y - fx[k].y);
    s.mean_saccade_amplitude += amp / (n - 1.0);
    s.max_saccade_amplitude = std::max(s.max_saccade_amplitude, amp);
  }
  return s;
}

/// Share of total fixation time spent in each region.
inline std::vector<double> dwell_times(const ScanPath& path, const RegionGrid& grid) {
  std::vector<double> out(grid.regions(), 0.0);
  double total = 0.0;
  for (const auto& f : path.fixations) {
    out[grid.region_of(f.x, f.y)] += f.duration_ms;
    total += f.duration_ms;
  }
  if (!(total > 0.0)) throw InsufficientDataError("dwell times need positive total fixation duration");
  for (auto& v : out) v /= total;
  return out;
}

/// Share of fixations (by count) landing in each region.
inline std::vector<double> fixation_distribution(const ScanPath& path, const RegionGrid& grid) {
  if (path.fixations.empty()) throw InsufficientDataError("fixation distribution of an empty scanpath");
  std::vector<double> out(grid.regions(), 0.0);
  for (const auto& f : path.fixations) out[grid.region_of(f.x, f.y)] += 1.0;
  for (auto& v : out) v /= static_cast<double>(path.fixations.size());
  return out;
}

/// Shannon entropy in bits, 0 log 0 = 0. Sums within 1e-6 of 1 are
/// renormalized; anything further off is rejected.
inline double entropy(std::span<const double> dist) {
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) throw InvalidDistributionError("distribution has a negative or NaN entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw InvalidDistributionError("distribution sums to " + std::to_string(total) + ", not 1");
  }
  double h = 0.0;
  for (double p : dist) {
    const double q = p / total;
    if (q > 0.0) h -= q * std::log2(q);
  }
  return h;
}

/// Recurrence rate: share of fixation pairs (i < j) closer than epsilon.
inline double rqa_recurrence(const ScanPath& path, double epsilon) {
  const auto& fx = path.fixations;
  if (fx.size() < 2) throw InsufficientDataError("recurrence rate needs at least 2 fixations");
  if (!(epsilon > 0.0)) throw ConfigError("recurrence radius must be positive");
  std::size_t close = 0;
  for (std::size_t i = 0; i < fx.size(); ++i)
    for (std::size_t j = i + 1; j < fx.size(); ++j)
      if (std::hypot(fx[i].x - fx[j].x, fx[i].y - fx[j].y) < epsilon) ++close;
  const double pairs = static_cast<double>(fx.size()) * static_cast<double>(fx.size() - 1) / 2.0;
  return static_cast<double>(close) / pairs;
}

struct SaccadicSpeed {
  double mean = 0.0;
  double max = 0.0;
};

/// Amplitude over the gap between one fixation's end and the next onset,
/// in normalized units per second. Non-positive gaps are skipped.
inline SaccadicSpeed saccadic_speed(const ScanPath& path) {
  const auto& fx = path.fixations;
  if (fx.size() < 2) throw InsufficientDataError("saccadic speed needs at least 2 fixations");
  SaccadicSpeed s;
  std::size_t valid = 0;
  for (std::size_t k = 0; k + 1 < fx.size(); ++k) {
    const double gap_ms = fx[k + 1].onset_ms - (fx[k].onset_ms + fx[k].duration_ms);
    if (!(gap_ms > 0.0)) continue;
    const double speed = std::hypot(fx[k + 1].x - fx[k].x, fx[k + 1].y - fx[k].y) / (gap_ms / 1000.0);
    s.mean += speed;
    s.max = std::max(s.max, speed);
    ++valid;
  }
  if (valid == 0) throw InsufficientDataError("no saccade with a positive inter-fixation interval");
  s.mean /= static_cast<double>(valid);
  return s;
}

struct FeatureConfig {
  RegionGrid grid;
  double rqa_epsilon = 0.05;
  UnvisitedRowPolicy policy = UnvisitedRowPolicy::uniform;
};

inline constexpr std::string_view kFeatureLayoutVersion = "gazefuse-features/1";

// Scalar block, in layout order.
inline constexpr std::array<std::string_view, 9> kScalarFeatureNames = {
    "mean_fixation_ms",   "std_fixation_ms", "mean_saccade_amplitude", "max_saccade_amplitude",
    "dispersion",         "gaze_entropy",    "rqa_recurrence_rate",    "mean_saccadic_speed",
    "fixation_entropy",
};

/// Indices of the temporally-aware descriptors dropped by the reduced
/// feature arm of the ablation.
inline constexpr std::array<std::size_t, 2> kTemporalFeatureIndices = {7, 8};

inline std::size_t feature_length(const RegionGrid& grid) {
  return kScalarFeatureNames.size() + grid.regions() + grid.regions() * grid.regions();
}

/// Component names in layout order: scalars, dwell_r<k>, trans_<i>_<j>.
inline std::vector<std::string> feature_names(const RegionGrid& grid) {
  std::vector<std::string> names(kScalarFeatureNames.begin(), kScalarFeatureNames.end());
  const auto R = grid.regions();
  for (std::size_t k = 0; k < R; ++k) names.push_back("dwell_r" + std::to_string(k));
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < R; ++j) names.push_back("trans_" + std::to_string(i) + "_" + std::to_string(j));
  return names;
}

/// Hand-engineered descriptor vector for one scanpath.
inline std::vector<double> assemble_features(const ScanPath& path, const FeatureConfig& cfg) {
  const auto stats = spatial_stats(path);
  const auto dwell = dwell_times(path, cfg.grid);
  const auto tm = transition_matrix(path, cfg.grid, cfg.policy);
  const auto speed = saccadic_speed(path);
  const auto fix_dist = fixation_distribution(path, cfg.grid);

  std::vector<double> v;
  v.reserve(feature_length(cfg.grid));
  v.push_back(stats.mean_fixation_ms);
  v.push_back(stats.std_fixation_ms);
  v.push_back(stats.mean_saccade_amplitude);
  v.push_back(stats.max_saccade_amplitude);
  v.push_back(stats.dispersion);
  v.push_back(entropy(dwell));
  v.push_back(rqa_recurrence(path, cfg.rqa_epsilon));
  v.push_back(speed.mean);
  v.push_back(entropy(fix_dist));
  v.insert(v.end(), dwell.begin(), dwell.end());
  v.insert(v.end(), tm.probs.begin(), tm.probs.end());
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalError("non-finite feature for " + path.subject_id + "/" + path.stimulus_id);
  }
  return v;
}

struct FeatureRow {
  std::string subject_id;
  std::string stimulus_id;
  int label = 0;
  std::vector<double> values;
};

inline void write_feature_csv(std::ostream& out, const RegionGrid& grid, const std::vector<FeatureRow>& rows) {
  out << "subject_id,stimulus_id,label";
  for (const auto& n : feature_names(grid)) out << ',' << n;
  out << '\n';
  for (const auto& r : rows) {
    out << r.subject_id << ',' << r.stimulus_id << ',' << r.label;
    for (double v : r.values) out << ',' << gaze::detail::format_double(v);
    out << '\n';
  }
}

}  // namespace gazefuse::features
