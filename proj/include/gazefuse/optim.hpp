#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/parameters.hpp"

namespace gazefuse {

enum class OptimizerKind { adam, sgd };

inline OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

inline const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be nonnegative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("sgd momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be nonnegative");
  }
};

/// Adam or momentum SGD with decoupled weight decay.
///
/// Decay uses the pre-step parameter value: p <- p - lr*update - lr*wd*p.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }

  const OptimizerConfig& config() const { return config_; }
  std::size_t step_count() const { return steps_; }

  void step(ParameterSet& params) {
    if (first_.empty()) {
      for (const auto& p : params) {
        first_.emplace_back(p.tensor.size(), 0.0);
        second_.emplace_back(config_.kind == OptimizerKind::adam ? p.tensor.size() : 0, 0.0);
      }
    }
    if (first_.size() != params.size()) throw UsageError("optimizer: parameter set changed between steps");
    for (const auto& p : params) {
      if (!p.tensor.has_grad()) throw UsageError("optimizer: missing gradient for parameter '" + p.name + "'");
    }
    ++steps_;
    const double lr = config_.learning_rate;
    const double decay = lr * config_.weight_decay;
    if (config_.kind == OptimizerKind::adam) {
      const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto& t = params[k].tensor;
        const auto g = t.grad();
        auto w = t.mutable_data();
        auto& m = first_[k];
        auto& v = second_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
          v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
          const double mhat = m[i] / c1;
          const double vhat = v[i] / c2;
          w[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon) + decay * w[i];
        }
      }
    } else {
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto& t = params[k].tensor;
        const auto g = t.grad();
        auto w = t.mutable_data();
        auto& buf = first_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
          buf[i] = config_.momentum * buf[i] + g[i];
          w[i] -= lr * buf[i] + decay * w[i];
        }
      }
    }
    for (const auto& p : params) {
      for (double x : p.tensor.data()) {
        if (!std::isfinite(x)) throw NumericalError("optimizer produced non-finite value in '" + p.name + "'");
      }
    }
  }

 private:
  OptimizerConfig config_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace gazefuse
