#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/ops.hpp"
#include "gazefuse/parameters.hpp"
#include "gazefuse/rng.hpp"
#include "gazefuse/tensor.hpp"

namespace gazefuse::ssm {

// Diagonal linear state-space recurrence, independently per channel c and
// state index s:
//
//   h[t,c,s] = A[c,s] h[t-1,c,s] + B[c,s] x[t,c],   h[-1] = 0
//   y[t,c]   = sum_s C[c,s] h[t,c,s] + D[c] x[t,c]
//
// Row-major layouts: x, y are [N x channels]; A, B, C are [channels x state].

struct Coefficients {
  std::size_t channels = 0;
  std::size_t state = 0;
  std::vector<double> a, b, c, d;

  void check() const {
    const std::size_t cs = channels * state;
    if (channels == 0 || state == 0 || a.size() != cs || b.size() != cs || c.size() != cs || d.size() != channels) {
      throw DimensionError("ssm coefficients inconsistent with " + std::to_string(channels) + " channels x " +
                           std::to_string(state) + " states");
    }
  }
};

/// Dependency depth (rounds that must run one after another) and total
/// pairwise combine operations, summed over all channel/state lanes.
struct ScanStats {
  std::size_t depth = 0;
  std::size_t combines = 0;
};

enum class ScanMode { sequential, parallel };

inline ScanMode parse_scan_mode(const std::string& s) {
  if (s == "sequential") return ScanMode::sequential;
  if (s == "parallel") return ScanMode::parallel;
  throw ConfigError("unknown scan mode '" + s + "' (expected sequential or parallel)");
}

inline const char* scan_mode_name(ScanMode m) { return m == ScanMode::sequential ? "sequential" : "parallel"; }

namespace detail {

inline void check_input(const Coefficients& k, std::span<const double> x, std::size_t n) {
  k.check();
  if (n == 0 || x.size() != n * k.channels) {
    throw DimensionError("ssm input must be [N x " + std::to_string(k.channels) + "] with N >= 1");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericalError("ssm input contains a non-finite value");
  }
}

[[noreturn]] inline void overflow(std::size_t t) {
  throw NumericalError("ssm state became non-finite at step " + std::to_string(t));
}

// y from stored states h[t,c,s].
inline std::vector<double> readout(const Coefficients& k, std::span<const double> x, std::size_t n,
                                   const std::vector<double>& h) {
  const std::size_t C = k.channels, S = k.state;
  std::vector<double> y(n * C);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      double acc = k.d[c] * x[t * C + c];
      const double* ht = h.data() + (t * C + c) * S;
      for (std::size_t s = 0; s < S; ++s) acc += k.c[c * S + s] * ht[s];
      if (!std::isfinite(acc)) overflow(t);
      y[t * C + c] = acc;
    }
  }
  return y;
}

}  // namespace detail

/// Step-by-step recurrence. `states`, when given, receives h as [N x C x S].
inline std::vector<double> scan_sequential(const Coefficients& k, std::span<const double> x, std::size_t n,
                                           ScanStats* stats = nullptr, std::vector<double>* states = nullptr) {
  detail::check_input(k, x, n);
  const std::size_t C = k.channels, S = k.state;
  std::vector<double> h(n * C * S);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      const double xt = x[t * C + c];
      double* ht = h.data() + (t * C + c) * S;
      const double* prev = t > 0 ? h.data() + ((t - 1) * C + c) * S : nullptr;
      for (std::size_t s = 0; s < S; ++s) {
        const double v = (prev ? k.a[c * S + s] * prev[s] : 0.0) + k.b[c * S + s] * xt;
        if (!std::isfinite(v)) detail::overflow(t);
        ht[s] = v;
      }
    }
  }
  if (stats) {
    stats->depth = n;
    stats->combines = (n - 1) * C * S;
  }
  auto y = detail::readout(k, x, n, h);
  if (states) *states = std::move(h);
  return y;
}

/// Hillis-Steele inclusive prefix scan over affine maps h -> a h + b.
/// Composing (a1, b1) then (a2, b2) gives (a2 a1, a2 b1 + b2); after
/// ceil(log2 N) rounds the b component at t is h_t.
inline std::vector<double> scan_parallel(const Coefficients& k, std::span<const double> x, std::size_t n,
                                         ScanStats* stats = nullptr, std::vector<double>* states = nullptr) {
  detail::check_input(k, x, n);
  const std::size_t C = k.channels, S = k.state;
  std::vector<double> h(n * C * S);
  std::vector<double> a(n), b(n), a_next(n), b_next(n);
  std::size_t depth = 0, combines = 0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t t = 0; t < n; ++t) {
        a[t] = k.a[c * S + s];
        b[t] = k.b[c * S + s] * x[t * C + c];
      }
      std::size_t rounds = 0;
      for (std::size_t offset = 1; offset < n; offset *= 2, ++rounds) {
        // Every position in a round reads only the previous round's arrays,
        // so the inner loop has no cross-iteration dependency.
        for (std::size_t t = 0; t < n; ++t) {
          if (t >= offset) {
            a_next[t] = a[t] * a[t - offset];
            b_next[t] = a[t] * b[t - offset] + b[t];
            ++combines;
          } else {
            a_next[t] = a[t];
            b_next[t] = b[t];
          }
        }
        std::swap(a, a_next);
        std::swap(b, b_next);
      }
      depth = std::max(depth, rounds);
      for (std::size_t t = 0; t < n; ++t) {
        if (!std::isfinite(b[t])) detail::overflow(t);
        h[(t * C + c) * S + s] = b[t];
      }
    }
  }
  if (stats) {
    stats->depth = depth;
    stats->combines = combines;
  }
  auto y = detail::readout(k, x, n, h);
  if (states) *states = std::move(h);
  return y;
}

/// Differentiable scan: x [N x C], a/b/c [C x S], d [C]. The backward pass
/// runs the adjoint recurrence in reverse time.
inline Tensor scan(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& d,
                   ScanMode mode = ScanMode::sequential) {
  if (x.rank() != 2 || a.rank() != 2) throw DimensionError("ssm scan expects rank-2 input and coefficients");
  const std::size_t n = x.dim(0), C = x.dim(1), S = a.dim(1);
  if (a.dim(0) != C || b.shape() != a.shape() || c.shape() != a.shape() || d.shape() != Shape{C}) {
    throw DimensionError("ssm scan: coefficient shapes do not match " + std::to_string(C) + " channels");
  }
  Coefficients k{C, S, a.to_vector(), b.to_vector(), c.to_vector(), d.to_vector()};
  std::vector<double> h;
  auto y = mode == ScanMode::sequential ? scan_sequential(k, x.data(), n, nullptr, &h)
                                        : scan_parallel(k, x.data(), n, nullptr, &h);
  return Tensor::make_result("ssm_scan", {n, C}, std::move(y), {x, a, b, c, d}, [n, C, S, h = std::move(h)](
                                                                                     ops::Node& self) {
    const auto& X = self.inputs[0]->data;
    const auto& A = self.inputs[1]->data;
    const auto& B = self.inputs[2]->data;
    const auto& Cm = self.inputs[3]->data;
    const auto& D = self.inputs[4]->data;
    const auto& gy = self.grad;
    double* gx = ops::detail::sink(self, 0);
    double* ga = ops::detail::sink(self, 1);
    double* gb = ops::detail::sink(self, 2);
    double* gc = ops::detail::sink(self, 3);
    double* gd = ops::detail::sink(self, 4);
    std::vector<double> gh(S);
    for (std::size_t ch = 0; ch < C; ++ch) {
      std::fill(gh.begin(), gh.end(), 0.0);
      for (std::size_t t = n; t-- > 0;) {
        const double g = gy[t * C + ch];
        const double xt = X[t * C + ch];
        const double* ht = h.data() + (t * C + ch) * S;
        const double* prev = t > 0 ? h.data() + ((t - 1) * C + ch) * S : nullptr;
        if (gd) gd[ch] += g * xt;
        double dx = g * D[ch];
        for (std::size_t s = 0; s < S; ++s) {
          const std::size_t i = ch * S + s;
          if (gc) gc[i] += g * ht[s];
          // gh_t = dL/dh_t, accumulated from y_t and from h_{t+1}
          gh[s] = g * Cm[i] + (t + 1 < n ? A[i] * gh[s] : 0.0);
          if (ga && prev) ga[i] += gh[s] * prev[s];
          if (gb) gb[i] += gh[s] * xt;
          dx += gh[s] * B[i];
        }
        if (gx) gx[t * C + ch] += dx;
      }
    }
  });
}

struct SsmConfig {
  std::size_t d_model = 64;
  std::size_t d_state = 8;
  std::size_t blocks = 2;
  ScanMode mode = ScanMode::sequential;
  double init_std = 0.02;
  double a_min = 0.5;  // initial A drawn uniformly in [a_min, a_max]
  double a_max = 0.95;

  void validate() const {
    if (d_model == 0 || d_state == 0) throw ConfigError("ssm dimensions must be positive");
    if (blocks == 0) throw ConfigError("ssm needs at least one block");
    if (!(a_min > 0.0 && a_min <= a_max && a_max < 1.0)) throw ConfigError("initial A range must lie in (0, 1)");
  }
};

/// One block: x + W_out scan(silu(W_in x + b_in)) + b_out. A = sigmoid(a_raw)
/// keeps every diagonal entry in (0, 1).
struct BlockParams {
  Tensor w_in, b_in;
  Tensor a_raw, b, c, d;
  Tensor w_out, b_out;

  Tensor a() const { return ops::sigmoid(a_raw); }
};

struct SsmParams {
  std::vector<BlockParams> blocks;

  static SsmParams init(const SsmConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.d_model, S = cfg.d_state;
    const double bc_std = 1.0 / std::sqrt(static_cast<double>(S));
    SsmParams p;
    for (std::size_t l = 0; l < cfg.blocks; ++l) {
      BlockParams blk;
      blk.w_in = init::gaussian({d, d}, cfg.init_std, rng);
      blk.b_in = init::zeros({d});
      std::vector<double> raw(d * S);
      for (auto& v : raw) {
        const double a = rng.uniform(cfg.a_min, cfg.a_max);
        v = std::log(a / (1.0 - a));
      }
      blk.a_raw = Tensor::from({d, S}, std::move(raw), true);
      blk.b = init::gaussian({d, S}, bc_std, rng);
      blk.c = init::gaussian({d, S}, bc_std, rng);
      blk.d = init::ones({d});
      blk.w_out = init::gaussian({d, d}, cfg.init_std, rng);
      blk.b_out = init::zeros({d});
      p.blocks.push_back(std::move(blk));
    }
    return p;
  }

  void collect(ParameterSet& set, const std::string& prefix) const {
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const auto& b = blocks[l];
      const std::string p = prefix + "block" + std::to_string(l) + ".";
      set.add(p + "w_in", b.w_in);
      set.add(p + "b_in", b.b_in);
      set.add(p + "a_raw", b.a_raw);
      set.add(p + "b", b.b);
      set.add(p + "c", b.c);
      set.add(p + "d", b.d);
      set.add(p + "w_out", b.w_out);
      set.add(p + "b_out", b.b_out);
    }
  }
};

inline Tensor block_forward(const Tensor& x, const BlockParams& p, ScanMode mode) {
  const Tensor u = ops::silu(ops::add(ops::matmul(x, p.w_in), p.b_in));
  const Tensor y = scan(u, p.a(), p.b, p.c, p.d, mode);
  return ops::add(x, ops::add(ops::matmul(y, p.w_out), p.b_out));
}

/// K stacked blocks over the token sequence; output has the input's shape.
inline Tensor encode_temporal(const Tensor& h, const SsmConfig& cfg, const SsmParams& p) {
  if (h.rank() != 2 || h.dim(1) != cfg.d_model) {
    throw DimensionError("temporal encoder expects [N x " + std::to_string(cfg.d_model) + "], got " +
                         shape_string(h.shape()));
  }
  Tensor z = h;
  for (const auto& b : p.blocks) z = block_forward(z, b, cfg.mode);
  return z;
}

/// Mean over the token axis.
inline Tensor pool(const Tensor& h) {
  if (h.rank() != 2 || h.dim(0) == 0) throw DimensionError("pool expects a non-empty [N x d] sequence");
  return ops::mean_rows(h);
}

}  // namespace gazefuse::ssm
