#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gazefuse/dataset.hpp"
#include "gazefuse/errors.hpp"
#include "gazefuse/metrics.hpp"
#include "gazefuse/model.hpp"
#include "gazefuse/optim.hpp"

namespace gazefuse::train {

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  std::size_t patience = 20;  // epochs without val-loss improvement before stopping
  std::uint64_t seed = 0;

  void validate() const {
    optimizer.validate();
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (patience == 0) throw ConfigError("patience must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_acc = 0;
  double train_acc = 0;  // running accuracy of the training pass (dropout on)
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0;
  bool stopped_early = false;
};

struct ParameterNorm {
  std::string name;
  double l2 = 0;
};

/// Non-finite loss or parameters during training. Carries where it happened
/// and a norm snapshot of every parameter at that moment.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, std::vector<ParameterNorm> norms, const std::string& cause)
      : NumericalError(describe(epoch, batch, norms, cause)), epoch_(epoch), batch_(batch), norms_(std::move(norms)) {}

  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }
  const std::vector<ParameterNorm>& norms() const { return norms_; }

 private:
  static std::string describe(std::size_t epoch, std::size_t batch, const std::vector<ParameterNorm>& norms,
                              const std::string& cause) {
    std::ostringstream os;
    os << "training diverged at epoch " << epoch << ", batch " << batch << ": " << cause;
    auto sorted = norms;
    // non-finite norms first, then descending
    auto key = [](double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); };
    std::stable_sort(sorted.begin(), sorted.end(), [&](const auto& a, const auto& b) { return key(a.l2) > key(b.l2); });
    os << "; largest parameter norms:";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, sorted.size()); ++i) {
      os << ' ' << sorted[i].name << '=' << sorted[i].l2;
    }
    return os.str();
  }

  std::size_t epoch_, batch_;
  std::vector<ParameterNorm> norms_;
};

inline std::vector<ParameterNorm> parameter_norms(const ParameterSet& params) {
  std::vector<ParameterNorm> out;
  for (const auto& p : params) {
    double s = 0;
    for (double v : p.tensor.data()) s += v * v;
    out.push_back({p.name, std::sqrt(s)});
  }
  return out;
}

struct Prediction {
  std::string subject_id;
  std::string stimulus_id;
  int label = 0;
  double prob = 0;
};

inline std::vector<Prediction> predict(const model::HybridModel& m, const std::vector<model::Prepared>& data) {
  NoGradGuard guard;
  Rng unused(0);
  std::vector<Prediction> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back({ex.subject_id, ex.stimulus_id, ex.label, m.forward(ex, false, unused).prob.item()});
  return out;
}

inline double mean_loss(const std::vector<Prediction>& preds) {
  double s = 0;
  for (const auto& p : preds) s += fusion::bce_loss(p.prob, p.label);
  return preds.empty() ? 0.0 : s / static_cast<double>(preds.size());
}

inline double accuracy(const std::vector<Prediction>& preds, double threshold = 0.5) {
  std::size_t correct = 0;
  for (const auto& p : preds) correct += ((p.prob >= threshold ? 1 : 0) == p.label);
  return preds.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(preds.size());
}

inline std::vector<model::Prepared> prepare_all(const model::HybridModel& m, const std::vector<data::Example>& examples) {
  std::vector<model::Prepared> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(m.prepare(e));
  return out;
}

/// Mini-batch minimization of mean BCE. The parameters with the lowest
/// validation loss are restored at the end.
inline TrainResult fit(model::HybridModel& m, const std::vector<data::Example>& train_set,
                       const std::vector<data::Example>& val_set, const TrainConfig& cfg,
                       const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw InsufficientDataError("training needs non-empty train and val sets");
  const auto train_in = prepare_all(m, train_set);
  const auto val_in = prepare_all(m, val_set);
  auto& params = m.parameters();
  Optimizer opt(cfg.optimizer);
  const Rng root = Rng(cfg.seed).split("train");

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  auto best = params.snapshot();
  std::vector<std::size_t> order(train_in.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = root.split("shuffle", epoch);
    Rng dropout_rng = root.split("dropout", epoch);
    shuffle(order, shuffle_rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      try {
        params.zero_grad();
        for (std::size_t i = start; i < end; ++i) {
          const auto& ex = train_in[order[i]];
          const auto out = m.forward(ex, true, dropout_rng);
          const Tensor loss = fusion::bce_loss(out.prob, {static_cast<double>(ex.label)});
          loss_sum += loss.item();
          correct += ((out.prob.item() >= 0.5 ? 1 : 0) == ex.label);
          ops::scale(loss, inv).backward();
        }
        opt.step(params);
      } catch (const NumericalError& e) {
        throw TrainingDiverged(epoch, batch_index, parameter_norms(params), e.what());
      }
    }
    const auto val_preds = predict(m, val_in);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.val_loss = mean_loss(val_preds);
    rec.val_acc = accuracy(val_preds);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      best = params.snapshot();
    } else if (epoch - result.best_epoch >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  params.restore(best);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  metrics::ConfusionMatrix confusion;
  metrics::Metrics metrics;
  metrics::RocCurve roc;
  double threshold = 0.5;
  double loss = 0;
  std::vector<Prediction> predictions;
};

inline EvalReport evaluate(const model::HybridModel& m, const std::vector<data::Example>& examples,
                           double threshold = 0.5) {
  if (examples.empty()) throw InsufficientDataError("nothing to evaluate");
  EvalReport r;
  r.threshold = threshold;
  r.predictions = predict(m, prepare_all(m, examples));
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& p : r.predictions) {
    scores.push_back(p.prob);
    labels.push_back(p.label);
  }
  r.confusion = metrics::confusion(scores, labels, threshold);
  r.metrics = metrics::compute(r.confusion);
  r.roc = metrics::roc_curve(scores, labels);
  r.loss = mean_loss(r.predictions);
  return r;
}

/// Per-example explanation: attention weight per modality (hybrid fusion
/// only) and the gradient of the pre-sigmoid score w.r.t. each model input.
struct Explanation {
  Prediction prediction;
  std::vector<double> alpha;  // empty unless hybrid
  std::vector<double> saliency_engineered, saliency_speech, saliency_visual;
};

inline Explanation explain(model::HybridModel& m, const data::Example& ex) {
  const auto in = m.prepare(ex, true);
  Rng unused(0);
  const auto out = m.forward(in, false, unused);
  Explanation e;
  e.prediction = {ex.subject_id, ex.stimulus_id, ex.label, out.prob.item()};
  if (out.has_alpha) e.alpha = out.alpha.to_vector();
  out.score.backward();
  auto grad_of = [](const Tensor& t) {
    if (!t.has_grad()) return std::vector<double>(t.size(), 0.0);
    const auto g = t.grad();
    return std::vector<double>(g.begin(), g.end());
  };
  e.saliency_engineered = grad_of(in.engineered);
  e.saliency_speech = grad_of(in.speech);
  e.saliency_visual = grad_of(in.visual);
  m.parameters().zero_grad();
  return e;
}

// ---------------------------------------------------------------------------
// Ablation

struct Arm {
  std::string id;
  fusion::Strategy strategy = fusion::Strategy::hybrid;
  bool temporal = true;
};

inline std::vector<Arm> all_arms() {
  std::vector<Arm> arms;
  for (bool temporal : {true, false}) {
    for (auto s : {fusion::Strategy::hybrid, fusion::Strategy::early, fusion::Strategy::late}) {
      arms.push_back({std::string(fusion::strategy_name(s)) + (temporal ? "" : "-no-temporal"), s, temporal});
    }
  }
  return arms;
}

/// Arms whose id is listed in `filter` (comma separated), in canonical order.
/// An empty filter selects all six.
inline std::vector<Arm> select_arms(const std::string& filter) {
  const auto arms = all_arms();
  if (filter.empty()) return arms;
  std::vector<std::string> wanted;
  std::stringstream ss(filter);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    const bool known = std::any_of(arms.begin(), arms.end(), [&](const Arm& a) { return a.id == item; });
    if (!known) throw ConfigError("unknown ablation arm '" + item + "'");
    wanted.push_back(item);
  }
  std::vector<Arm> out;
  for (const auto& a : arms) {
    if (std::find(wanted.begin(), wanted.end(), a.id) != wanted.end()) out.push_back(a);
  }
  return out;
}

struct ArmResult {
  Arm arm;
  bool ok = false;
  std::string error;
  std::uint64_t split_hash = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  EvalReport test;
};

/// Trains and evaluates each arm on the same split with the same seeds.
/// A failing arm is recorded and the sweep continues.
inline std::vector<ArmResult> ablate(const model::ModelConfig& base, const TrainConfig& train_cfg,
                                     std::uint64_t model_seed, const data::SplitExamples& split,
                                     std::uint64_t split_hash, const std::vector<Arm>& arms,
                                     const std::function<void(const ArmResult&)>& on_arm = {}) {
  std::vector<ArmResult> results;
  const auto norm = model::Normalization::fit(split.train);
  for (const auto& arm : arms) {
    ArmResult r;
    r.arm = arm;
    r.split_hash = split_hash;
    try {
      auto cfg = base;
      cfg.fusion = arm.strategy;
      cfg.temporal_features = arm.temporal;
      model::HybridModel m(cfg, norm, model_seed);
      const auto tr = fit(m, split.train, split.val, train_cfg);
      r.epochs_run = tr.history.size();
      r.best_epoch = tr.best_epoch;
      r.test = evaluate(m, split.test);
      r.ok = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
    if (on_arm) on_arm(r);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace gazefuse::train
