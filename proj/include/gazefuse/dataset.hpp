#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/features.hpp"
#include "gazefuse/gaze/cohort.hpp"
#include "gazefuse/rng.hpp"

namespace gazefuse::data {

/// Columns of one token row: x, y, duration (s), onset gap to previous fixation (s).
inline constexpr std::size_t kTokenDim = 4;

/// One scanpath with its subject's stand-in modality vectors.
struct Example {
  std::string subject_id;
  std::string stimulus_id;
  int label = 0;
  std::size_t token_rows = 0;
  std::vector<double> tokens;  // [token_rows x kTokenDim]
  std::vector<double> engineered;
  std::vector<double> speech;
  std::vector<double> visual;
};

inline std::vector<double> token_matrix(const gaze::ScanPath& path) {
  std::vector<double> out;
  out.reserve(path.fixations.size() * kTokenDim);
  for (std::size_t i = 0; i < path.fixations.size(); ++i) {
    const auto& f = path.fixations[i];
    const double gap = i == 0 ? 0.0 : (f.onset_ms - path.fixations[i - 1].onset_ms) / 1000.0;
    out.insert(out.end(), {f.x, f.y, f.duration_ms / 1000.0, gap});
  }
  return out;
}

struct BuildResult {
  std::vector<Example> examples;
  std::size_t skipped = 0;
  std::vector<std::string> messages;
};

/// One example per scanpath. Paths whose features cannot be computed (too
/// few fixations, degenerate timing) are skipped and reported.
inline BuildResult build_examples(const gaze::Cohort& cohort, const features::FeatureConfig& cfg) {
  BuildResult out;
  for (const auto& subj : cohort.subjects) {
    for (const auto& path : subj.paths) {
      Example ex;
      ex.subject_id = subj.id;
      ex.stimulus_id = path.stimulus_id;
      ex.label = subj.label;
      try {
        ex.engineered = features::assemble_features(path, cfg);
      } catch (const Error& e) {
        ++out.skipped;
        out.messages.push_back(subj.id + "/" + path.stimulus_id + ": " + e.what());
        continue;
      }
      ex.token_rows = path.fixations.size();
      ex.tokens = token_matrix(path);
      ex.speech = subj.speech;
      ex.visual = subj.visual;
      out.examples.push_back(std::move(ex));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subject-level split

struct SplitConfig {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train > 0.0 && val > 0.0 && test > 0.0)) throw ConfigError("split ratios must be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  }
};

struct Split {
  std::vector<std::string> train, val, test;

  /// FNV-1a over the ordered assignment; equal hashes mean equal splits.
  std::uint64_t hash() const {
    std::string s;
    for (const auto* part : {&train, &val, &test}) {
      for (const auto& id : *part) s += id + ",";
      s += ";";
    }
    return Rng::hash(s);
  }
};

/// Largest-remainder apportionment of `n` items over `ratios`; ties go to
/// the earlier bucket.
inline std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& ratios) {
  std::vector<std::size_t> sizes(ratios.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    const double exact = ratios[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += sizes[k];
    rema.emplace_back(exact - static_cast<double>(sizes[k]), k);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first + 1e-12; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) sizes[rema[i % rema.size()].second]++;
  return sizes;
}

/// Assigns whole subjects to train/val/test. With stratification, each
/// class is shuffled and the classes are interleaved evenly before the
/// cut, so every split sees (nearly) the overall class ratio.
inline Split split_subjects(const std::vector<std::pair<std::string, int>>& subjects, const SplitConfig& cfg) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).split("split");
  std::vector<std::pair<std::string, int>> order;
  if (cfg.stratified) {
    std::map<int, std::vector<std::pair<std::string, int>>> by_class;
    for (const auto& s : subjects) by_class[s.second].push_back(s);
    std::vector<std::tuple<double, int, std::pair<std::string, int>>> keyed;
    for (auto& [label, members] : by_class) {
      shuffle(members, rng);
      const double n = static_cast<double>(members.size());
      for (std::size_t r = 0; r < members.size(); ++r) {
        keyed.emplace_back((static_cast<double>(r) + 0.5) / n, label, members[r]);
      }
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
      return std::get<0>(a) != std::get<0>(b) ? std::get<0>(a) < std::get<0>(b) : std::get<1>(a) < std::get<1>(b);
    });
    for (auto& k : keyed) order.push_back(std::get<2>(k));
  } else {
    order = subjects;
    shuffle(order, rng);
  }

  const auto sizes = apportion(order.size(), {cfg.train, cfg.val, cfg.test});
  Split split;
  std::vector<std::string>* parts[3] = {&split.train, &split.val, &split.test};
  std::size_t pos = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::map<int, std::size_t> counts;
    for (std::size_t i = 0; i < sizes[k]; ++i, ++pos) {
      parts[k]->push_back(order[pos].first);
      counts[order[pos].second]++;
    }
    if (cfg.stratified) {
      std::map<int, bool> classes;
      for (const auto& s : subjects) classes[s.second] = true;
      for (const auto& [label, _] : classes) {
        if (counts[label] == 0) {
          static const char* names[] = {"train", "val", "test"};
          throw ConfigError(std::string("too few subjects: the ") + names[k] + " split has no subject with label " +
                            std::to_string(label));
        }
      }
    } else if (sizes[k] == 0) {
      throw ConfigError("too few subjects to fill every split");
    }
  }
  return split;
}

inline std::vector<std::pair<std::string, int>> subject_labels(const std::vector<Example>& examples) {
  std::vector<std::pair<std::string, int>> out;
  std::map<std::string, int> seen;
  for (const auto& e : examples) {
    auto [it, inserted] = seen.emplace(e.subject_id, e.label);
    if (inserted) {
      out.emplace_back(e.subject_id, e.label);
    } else if (it->second != e.label) {
      throw ConfigError("subject " + e.subject_id + " has conflicting labels");
    }
  }
  return out;
}

/// Examples whose subject is in `ids`, in original order.
inline std::vector<Example> select(const std::vector<Example>& examples, const std::vector<std::string>& ids) {
  std::map<std::string, bool> keep;
  for (const auto& id : ids) keep[id] = true;
  std::vector<Example> out;
  for (const auto& e : examples) {
    if (keep.count(e.subject_id)) out.push_back(e);
  }
  return out;
}

struct SplitExamples {
  std::vector<Example> train, val, test;
};

inline SplitExamples apply_split(const std::vector<Example>& examples, const Split& split) {
  return {select(examples, split.train), select(examples, split.val), select(examples, split.test)};
}

// ---------------------------------------------------------------------------
// Standardization (statistics fitted on the training split only)

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const std::vector<const std::vector<double>*>& rows, std::size_t dim) {
    if (rows.empty()) throw InsufficientDataError("cannot fit standardizer on zero rows");
    Standardizer s;
    s.mean.assign(dim, 0.0);
    s.scale.assign(dim, 0.0);
    for (const auto* r : rows) {
      if (r->size() % dim != 0) throw DimensionError("standardizer row width mismatch");
    }
    double count = 0.0;
    for (const auto* r : rows) {
      for (std::size_t i = 0; i < r->size(); ++i) s.mean[i % dim] += (*r)[i];
      count += static_cast<double>(r->size() / dim);
    }
    for (auto& m : s.mean) m /= count;
    for (const auto* r : rows) {
      for (std::size_t i = 0; i < r->size(); ++i) {
        const double d = (*r)[i] - s.mean[i % dim];
        s.scale[i % dim] += d * d;
      }
    }
    for (auto& v : s.scale) {
      const double sd = std::sqrt(v / count);
      v = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  /// Applies column-wise to a row-major block whose width is dim().
  std::vector<double> apply(const std::vector<double>& v) const {
    const std::size_t dim = mean.size();
    if (dim == 0 || v.size() % dim != 0) throw DimensionError("standardizer applied to mismatched width");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean[i % dim]) / scale[i % dim];
    return out;
  }
};

}  // namespace gazefuse::data
