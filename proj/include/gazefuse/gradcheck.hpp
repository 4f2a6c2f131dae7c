#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gazefuse/parameters.hpp"

namespace gazefuse {

struct GradCheckBlock {
  std::string name;
  std::size_t entries = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.max_rel_error);
    return m;
  }
};

enum class Stencil {
  central3,  // (f(x+h) - f(x-h)) / 2h, error O(h^2)
  central5,  // (f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h, error O(h^4)
};

struct GradCheckOptions {
  double step = 1e-3;
  Stencil stencil = Stencil::central5;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  // The floor keeps entries whose true gradient is ~0 from dividing by noise.
  double floor = 1e-6;
};

/// Compares analytic gradients of `loss_fn` against finite differences for
/// every entry of every tensor in `params`. `loss_fn` must be deterministic
/// (no dropout) and return a scalar.
inline GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParameterSet& params,
                                  GradCheckOptions options = {}) {
  params.zero_grad();
  loss_fn().backward();

  GradCheckReport report;
  for (auto& p : params) {
    GradCheckBlock block{p.name, p.tensor.size(), 0.0, 0.0};
    std::vector<double> analytic(p.tensor.size(), 0.0);
    if (p.tensor.has_grad()) {
      const auto g = p.tensor.grad();
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    auto w = p.tensor.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      const double h = options.step;
      auto at = [&](double offset) {
        NoGradGuard guard;
        w[i] = saved + offset;
        return loss_fn().item();
      };
      double numeric;
      if (options.stencil == Stencil::central3) {
        numeric = (at(h) - at(-h)) / (2.0 * h);
      } else {
        numeric = (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
      }
      w[i] = saved;
      const double abs_err = std::abs(numeric - analytic[i]);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), options.floor});
      block.max_abs_error = std::max(block.max_abs_error, abs_err);
      block.max_rel_error = std::max(block.max_rel_error, abs_err / denom);
    }
    report.blocks.push_back(block);
  }
  params.zero_grad();
  return report;
}

}  // namespace gazefuse
