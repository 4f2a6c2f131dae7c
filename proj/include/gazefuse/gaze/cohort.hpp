#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/gaze/preprocess.hpp"
#include "gazefuse/gaze/types.hpp"
#include "gazefuse/rng.hpp"

namespace gazefuse::gaze {

/// Axis-aligned rectangle in normalized coordinates.
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

/// Class-conditional generator settings. Every between-class difference is
/// scaled by `class_gap`; at 0 the two classes are identically distributed.
///
/// Label 1 (ASD) subjects, relative to label 0:
///   - spend `social_dwell_gap` less of their fixations on the social region,
///   - scatter non-social fixations more widely (`spread_gap`),
///   - make slower saccades (`saccade_speed_gap`).
/// Stand-in speech/visual vectors are N(+-shift/2, 1) per dimension.
struct CohortConfig {
  std::size_t n_asd = 32;
  std::size_t n_td = 32;
  std::size_t stimuli = 4;
  std::array<double, kCategoryCount> category_mix{1.0 / 7, 1.0 / 7, 1.0 / 7, 1.0 / 7, 1.0 / 7, 1.0 / 7, 1.0 / 7};
  std::size_t min_fixations = 14;
  std::size_t max_fixations = 22;

  double class_gap = 1.0;
  double social_dwell_td = 0.55;
  double social_dwell_gap = 0.25;
  double spread_td = 0.12;
  double spread_gap = 0.08;
  double saccade_speed_td = 6.0;  // normalized units per second
  double saccade_speed_gap = 2.0;

  double fixation_ms_mean = 260.0;
  double fixation_ms_sd = 70.0;
  double sample_rate_hz = 250.0;
  double sample_noise = 0.002;
  double blink_probability = 0.05;
  double dropout_probability = 0.01;

  double modality_shift = 0.8;
  std::size_t speech_dim = 8;
  std::size_t visual_dim = 12;

  PreprocessConfig preprocess;

  void validate() const {
    if (n_asd + n_td == 0) throw ConfigError("cohort needs at least one subject");
    if (stimuli == 0) throw ConfigError("cohort needs at least one stimulus per subject");
    double total = 0.0;
    for (double p : category_mix) {
      if (!(p >= 0.0)) throw ConfigError("category mix entries must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("category mix must sum to 1");
    if (min_fixations < 2 || max_fixations < min_fixations) throw ConfigError("invalid fixation count range");
    if (!(class_gap >= 0.0)) throw ConfigError("class gap must be nonnegative");
    const double asd_dwell = social_dwell_td - social_dwell_gap * class_gap;
    if (!(social_dwell_td <= 1.0 && asd_dwell >= 0.0)) throw ConfigError("social dwell probabilities out of [0,1]");
    if (!(saccade_speed_td - saccade_speed_gap * class_gap > 0.0)) throw ConfigError("saccade speed must stay positive");
    if (!(spread_td > 0.0)) throw ConfigError("spread must be positive");
    if (!(fixation_ms_mean > 0.0 && fixation_ms_sd >= 0.0)) throw ConfigError("invalid fixation duration model");
    if (!(sample_rate_hz > 0.0)) throw ConfigError("sample rate must be positive");
    if (speech_dim == 0 || visual_dim == 0) throw ConfigError("modality dimensions must be positive");
  }
};

struct Stimulus {
  std::string id;
  StimulusCategory category = StimulusCategory::animals;
  Box social;
};

struct Subject {
  std::string id;
  int label = 0;
  std::vector<ScanPath> paths;
  std::vector<double> speech;  // f_s stand-in
  std::vector<double> visual;  // f_v stand-in
};

struct Cohort {
  CohortConfig config;
  std::uint64_t seed = 0;
  std::vector<Stimulus> stimuli;
  std::vector<Subject> subjects;

  std::size_t path_count() const {
    std::size_t n = 0;
    for (const auto& s : subjects) n += s.paths.size();
    return n;
  }
};

namespace detail {

inline std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

inline std::vector<Stimulus> make_stimuli(const CohortConfig& cfg, Rng rng) {
  std::vector<Stimulus> out;
  for (std::size_t s = 0; s < cfg.stimuli; ++s) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t cat = kCategoryCount - 1;
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      acc += cfg.category_mix[c];
      if (u < acc && cfg.category_mix[c] > 0.0) {
        cat = c;
        break;
      }
    }
    while (cfg.category_mix[cat] == 0.0 && cat > 0) --cat;
    const double cx = rng.uniform(0.3, 0.7), cy = rng.uniform(0.3, 0.7);
    Stimulus st;
    st.category = static_cast<StimulusCategory>(cat);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%02zu", std::string(kCategoryNames[cat]).c_str(), s);
    st.id = buf;
    st.social = {cx - 0.08, cy - 0.10, cx + 0.08, cy + 0.10};
    out.push_back(st);
  }
  return out;
}

// Fixation targets for one viewing, then raw samples at the tracker rate.
inline std::vector<RawGazeSample> simulate_recording(const CohortConfig& cfg, const Stimulus& stim, int label,
                                                     Rng& rng) {
  const double g = label == 1 ? cfg.class_gap : 0.0;
  const double p_social = cfg.social_dwell_td - cfg.social_dwell_gap * g;
  const double spread = cfg.spread_td + cfg.spread_gap * g;
  const double speed = cfg.saccade_speed_td - cfg.saccade_speed_gap * g;
  const double sx = cfg.preprocess.screen_w, sy = cfg.preprocess.screen_h;
  const double dt = 1000.0 / cfg.sample_rate_hz;
  constexpr double margin = 0.01;

  const std::size_t n_fix = cfg.min_fixations + rng.below(cfg.max_fixations - cfg.min_fixations + 1);
  std::vector<std::pair<double, double>> targets;
  for (std::size_t k = 0; k < n_fix; ++k) {
    double x, y;
    if (rng.bernoulli(p_social)) {
      x = rng.uniform(stim.social.x0 + margin, stim.social.x1 - margin);
      y = rng.uniform(stim.social.y0 + margin, stim.social.y1 - margin);
    } else {
      Box keep_out{stim.social.x0 - margin, stim.social.y0 - margin, stim.social.x1 + margin, stim.social.y1 + margin};
      int tries = 0;
      do {
        x = std::clamp(rng.normal(0.5, spread), 0.02, 0.98);
        y = std::clamp(rng.normal(0.5, spread), 0.02, 0.98);
      } while (keep_out.contains(x, y) && ++tries < 200);
      if (keep_out.contains(x, y)) x = keep_out.x0 > 0.1 ? 0.05 : 0.95;
    }
    targets.emplace_back(x, y);
  }

  std::vector<RawGazeSample> samples;
  double t = 0.0;
  auto emit = [&](double x, double y, bool valid) {
    const double nx = std::clamp(x + rng.normal(0.0, cfg.sample_noise), 0.0, 1.0);
    const double ny = std::clamp(y + rng.normal(0.0, cfg.sample_noise), 0.0, 1.0);
    samples.push_back({t, valid ? nx * sx : 0.0, valid ? ny * sy : 0.0, valid});
    t += dt;
  };
  for (std::size_t k = 0; k < n_fix; ++k) {
    const auto [x, y] = targets[k];
    const double dur = std::max(100.0, rng.normal(cfg.fixation_ms_mean, cfg.fixation_ms_sd));
    const auto count = static_cast<std::size_t>(dur / dt);
    std::size_t blink_at = count, blink_len = 0;
    if (rng.bernoulli(cfg.blink_probability)) {
      blink_len = static_cast<std::size_t>(40.0 / dt);
      blink_at = count / 3;
    } else if (rng.bernoulli(cfg.dropout_probability)) {
      blink_len = static_cast<std::size_t>(200.0 / dt);
      blink_at = count / 4;
    }
    for (std::size_t i = 0; i < count; ++i) emit(x, y, !(i >= blink_at && i < blink_at + blink_len));
    if (k + 1 < n_fix) {
      const auto [nx, ny] = targets[k + 1];
      const double amp = std::hypot(nx - x, ny - y);
      const double v = speed * std::exp(rng.normal(0.0, 0.15));
      const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(amp / v * 1000.0 / dt));
      for (std::size_t i = 1; i <= steps; ++i) {
        const double w = static_cast<double>(i) / static_cast<double>(steps + 1);
        emit(x + w * (nx - x), y + w * (ny - y), true);
      }
    }
  }
  return samples;
}

}  // namespace detail

/// Seeded synthetic cohort. Each subject draws from its own split stream,
/// so the result does not depend on generation order.
inline Cohort generate_cohort(const CohortConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng root(seed);
  Cohort cohort;
  cohort.config = cfg;
  cohort.seed = seed;
  cohort.stimuli = detail::make_stimuli(cfg, root.split("stimuli"));
  const std::size_t n = cfg.n_asd + cfg.n_td;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.split("subject", i);
    Subject subj;
    subj.id = detail::numbered("S", i);
    subj.label = i < cfg.n_asd ? 1 : 0;
    const double mu = (subj.label == 1 ? 0.5 : -0.5) * cfg.modality_shift * cfg.class_gap;
    Rng mod = rng.split("modalities");
    for (std::size_t k = 0; k < cfg.speech_dim; ++k) subj.speech.push_back(mod.normal(mu, 1.0));
    for (std::size_t k = 0; k < cfg.visual_dim; ++k) subj.visual.push_back(mod.normal(mu, 1.0));
    for (std::size_t s = 0; s < cohort.stimuli.size(); ++s) {
      const auto& stim = cohort.stimuli[s];
      Rng path_rng = rng.split("path", s);
      const auto raw = detail::simulate_recording(cfg, stim, subj.label, path_rng);
      ScanPath path;
      path.subject_id = subj.id;
      path.stimulus_id = stim.id;
      path.category = stim.category;
      path.label = subj.label;
      path.fixations = preprocess_recording(raw, cfg.preprocess);
      subj.paths.push_back(std::move(path));
    }
    cohort.subjects.push_back(std::move(subj));
  }
  return cohort;
}

/// Fraction of total fixation time inside `region`.
inline double dwell_fraction(const ScanPath& path, const Box& region) {
  double inside = 0.0, total = 0.0;
  for (const auto& f : path.fixations) {
    total += f.duration_ms;
    if (region.contains(f.x, f.y)) inside += f.duration_ms;
  }
  return total > 0.0 ? inside / total : 0.0;
}

}  // namespace gazefuse::gaze
