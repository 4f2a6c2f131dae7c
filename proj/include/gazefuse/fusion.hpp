#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/ops.hpp"
#include "gazefuse/tensor.hpp"

namespace gazefuse::fusion {

/// Predicted probabilities are clamped to [eps, 1 - eps] so the loss stays finite.
inline constexpr double kProbabilityEpsilon = 1e-7;

enum class Strategy { hybrid, early, late };

inline Strategy parse_strategy(std::string_view s) {
  if (s == "hybrid") return Strategy::hybrid;
  if (s == "early") return Strategy::early;
  if (s == "late") return Strategy::late;
  throw ConfigError("unknown fusion strategy '" + std::string(s) + "' (expected hybrid, early or late)");
}

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::hybrid: return "hybrid";
    case Strategy::early: return "early";
    case Strategy::late: return "late";
  }
  return "?";
}

struct AttentionResult {
  Tensor fused;  // [d_f]
  Tensor alpha;  // [M]
};

/// Scores s_i = w . tanh(W f_i) for every modality row.
inline Tensor attention_scores(const Tensor& stacked, const Tensor& W, const Tensor& w) {
  const std::size_t d_a = W.dim(0);
  return ops::reshape(ops::matmul(ops::tanh(ops::matmul(stacked, ops::transpose(W))), ops::reshape(w, {d_a, 1})),
                      {stacked.dim(0)});
}

/// alpha = softmax_i(w . tanh(W f_i)); fused = sum_i alpha_i f_i.
/// `modalities` are already projected to the common dimension d_f.
inline AttentionResult attention_fusion(const std::vector<Tensor>& modalities, const Tensor& W, const Tensor& w) {
  if (modalities.empty()) throw ConfigError("attention fusion needs at least one modality");
  if (W.rank() != 2 || w.rank() != 1 || w.dim(0) != W.dim(0)) {
    throw ConfigError("attention fusion: W must be [d_a x d_f] and w [d_a], got " + shape_string(W.shape()) +
                      " and " + shape_string(w.shape()));
  }
  const std::size_t d_f = W.dim(1);
  for (const auto& f : modalities) {
    if (f.rank() != 1 || f.dim(0) != d_f) {
      throw ConfigError("attention fusion: modality vector " + shape_string(f.shape()) + " does not match d_f = " +
                        std::to_string(d_f));
    }
  }
  const std::size_t m = modalities.size();
  const Tensor stacked = ops::stack_rows(modalities);
  const Tensor alpha = ops::softmax(attention_scores(stacked, W, w), 0);
  const Tensor fused = ops::reshape(ops::matmul(ops::reshape(alpha, {1, m}), stacked), {d_f});
  return {fused, alpha};
}

/// Concatenation in declared modality order.
inline Tensor early_fusion(const std::vector<Tensor>& modalities) {
  if (modalities.empty()) throw ConfigError("early fusion needs at least one modality");
  if (modalities.size() == 1) return modalities.front();
  return ops::concat(modalities);
}

/// Unweighted mean of per-modality probabilities.
inline double late_fusion(std::span<const double> probs) {
  if (probs.empty()) throw UsageError("late fusion needs at least one probability");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("late fusion input " + std::to_string(p) + " is outside [0, 1]");
    total += p;
  }
  return total / static_cast<double>(probs.size());
}

inline Tensor late_fusion(const std::vector<Tensor>& probs) {
  if (probs.empty()) throw UsageError("late fusion needs at least one probability");
  for (const auto& p : probs) {
    if (p.size() != 1 || !(p.item() >= 0.0 && p.item() <= 1.0)) {
      throw UsageError("late fusion inputs must be scalar probabilities in [0, 1]");
    }
  }
  if (probs.size() == 1) return probs.front();
  return ops::mean(ops::concat(probs));
}

/// W_c . f + b_c as a [1] tensor.
inline Tensor logit(const Tensor& f, const Tensor& wc, const Tensor& bc) {
  if (f.shape() != wc.shape() || bc.size() != 1) {
    throw DimensionError("classifier expects weights shaped like " + shape_string(f.shape()) + " and a scalar bias");
  }
  return ops::add(ops::sum(ops::mul(f, wc)), bc);
}

inline Tensor clamp_probability(const Tensor& p) {
  return ops::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

/// sigmoid(W_c . f + b_c), clamped to [eps, 1 - eps].
inline Tensor classify(const Tensor& f, const Tensor& wc, const Tensor& bc) {
  return clamp_probability(ops::sigmoid(logit(f, wc, bc)));
}

inline double bce_loss(double p, int y) {
  if (y != 0 && y != 1) throw UsageError("label must be 0 or 1");
  return -(y == 1 ? std::log(p) : std::log(1.0 - p));
}

/// Mean binary cross-entropy over a [n] probability tensor.
inline Tensor bce_loss(const Tensor& p, const std::vector<double>& labels) {
  return ops::binary_cross_entropy(p, labels);
}

}  // namespace gazefuse::fusion
