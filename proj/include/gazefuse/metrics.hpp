#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "gazefuse/errors.hpp"

namespace gazefuse::metrics {

struct ConfusionMatrix {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;

  std::size_t positives() const { return tp + fn; }
  std::size_t negatives() const { return tn + fp; }
  std::size_t total() const { return positives() + negatives(); }

  bool operator==(const ConfusionMatrix&) const = default;
};

/// Label 1 is the positive class; a score >= threshold predicts 1.
inline ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  if (scores.size() != labels.size()) throw DimensionError("confusion: scores and labels differ in length");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? m.tp : m.fn)++;
    } else if (labels[i] == 0) {
      (predicted ? m.fp : m.tn)++;
    } else {
      throw UsageError("labels must be 0 or 1");
    }
  }
  return m;
}

/// Ratios with a zero denominator are reported as 0 and flagged.
struct Metrics {
  double accuracy = 0, sensitivity = 0, specificity = 0, precision = 0, f1 = 0;
  bool accuracy_undefined = false;
  bool sensitivity_undefined = false;
  bool specificity_undefined = false;
  bool precision_undefined = false;
  bool f1_undefined = false;
};

inline Metrics compute(const ConfusionMatrix& m) {
  auto ratio = [](std::size_t num, std::size_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics r;
  r.accuracy = ratio(m.tp + m.tn, m.total(), r.accuracy_undefined);
  r.sensitivity = ratio(m.tp, m.tp + m.fn, r.sensitivity_undefined);
  r.specificity = ratio(m.tn, m.tn + m.fp, r.specificity_undefined);
  r.precision = ratio(m.tp, m.tp + m.fp, r.precision_undefined);
  const double denom = r.precision + r.sensitivity;
  r.f1_undefined = r.precision_undefined || r.sensitivity_undefined || denom == 0.0;
  r.f1 = r.f1_undefined ? 0.0 : 2.0 * r.precision * r.sensitivity / denom;
  return r;
}

struct RocPoint {
  double fpr = 0, tpr = 0;
  double threshold = 0;  // scores >= threshold are called positive at this point
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0;
  bool defined = false;  // false when only one class is present
};

/// Threshold sweep over unique scores, highest first. Equal scores enter
/// together as one (diagonal) step, which gives ties half credit in the
/// trapezoid area.
inline RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_curve: scores and labels differ in length");
  std::size_t pos = 0, neg = 0;
  for (int y : labels) {
    if (y == 1) {
      ++pos;
    } else if (y == 0) {
      ++neg;
    } else {
      throw UsageError("labels must be 0 or 1");
    }
  }
  RocCurve roc;
  if (pos == 0 || neg == 0) return roc;
  roc.defined = true;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double P = static_cast<double>(pos), N = static_cast<double>(neg);
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp)++;
    const RocPoint prev = roc.points.back();
    RocPoint next{static_cast<double>(fp) / N, static_cast<double>(tp) / P, s};
    area += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
    roc.points.push_back(next);
  }
  roc.auc = area;
  return roc;
}

}  // namespace gazefuse::metrics
