#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/rng.hpp"
#include "gazefuse/tensor.hpp"

namespace gazefuse::ops {

namespace detail {

using gazefuse::detail::Node;

// Gradient sink for input `i`, or nullptr when that input is a constant.
inline double* sink(Node& self, std::size_t i) {
  auto& in = *self.inputs[i];
  return in.requires_grad ? in.grad_buffer().data() : nullptr;
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Elementwise unary op from value/derivative functors. The derivative gets
// both input and output so sigmoid/tanh can reuse the forward result.
template <typename F, typename DF>
Tensor unary(const char* name, const Tensor& x, F f, DF df) {
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_result(name, x.shape(), std::move(out), {x}, [df](Node& self) {
    double* gx = sink(self, 0);
    if (!gx) return;
    const auto& xin = self.inputs[0]->data;
    for (std::size_t i = 0; i < self.data.size(); ++i) gx[i] += self.grad[i] * df(xin[i], self.data[i]);
  });
}

}  // namespace detail

using gazefuse::detail::Node;

// ---------------------------------------------------------------------------
// Linear algebra

/// Matrix product of [n x k] and [k x m].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += aip * brow[j];
    }
  }
  return Tensor::make_result("matmul", {n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    const auto& A = self.inputs[0]->data;
    const auto& B = self.inputs[1]->data;
    const auto& G = self.grad;
    if (double* ga = detail::sink(self, 0)) {
      // dA = G * B^T
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* g = G.data() + i * m;
          const double* brow = B.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) acc += g[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (double* gb = detail::sink(self, 1)) {
      // dB = A^T * G
      for (std::size_t i = 0; i < n; ++i) {
        const double* g = G.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          double* dst = gb + p * m;
          for (std::size_t j = 0; j < m; ++j) dst[j] += aip * g[j];
        }
      }
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank(a, 2, "transpose");
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(n * m);
  const auto A = a.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = A[i * m + j];
  return Tensor::make_result("transpose", {m, n}, std::move(out), {a}, [n, m](Node& self) {
    if (double* ga = detail::sink(self, 0)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += self.grad[j * n + i];
    }
  });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  return Tensor::make_result("reshape", std::move(shape), a.to_vector(), {a}, [](Node& self) {
    if (double* ga = detail::sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

/// a + b. `b` may equal a's shape, or a's trailing dimensions (bias added
/// to every leading index). Nothing else broadcasts.
inline Tensor add(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const bool same = sa == sb;
  const bool bias = !same && sb.size() < sa.size() && std::equal(sb.begin(), sb.end(), sa.end() - sb.size());
  if (!same && !bias) {
    throw DimensionError("add: cannot broadcast " + shape_string(sb) + " onto " + shape_string(sa));
  }
  const std::size_t inner = b.size();
  std::vector<double> out(a.size());
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i % inner];
  return Tensor::make_result("add", sa, std::move(out), {a, b}, [inner](Node& self) {
    if (double* ga = detail::sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
    if (double* gb = detail::sink(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % inner] += self.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    double* ga = detail::sink(self, 0);
    double* gb = detail::sink(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (ga) ga[i] += self.grad[i];
      if (gb) gb[i] -= self.grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& A = self.inputs[0]->data;
    const auto& B = self.inputs[1]->data;
    double* ga = detail::sink(self, 0);
    double* gb = detail::sink(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (ga) ga[i] += self.grad[i] * B[i];
      if (gb) gb[i] += self.grad[i] * A[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
  return Tensor::make_result("scale", a.shape(), std::move(out), {a}, [c](Node& self) {
    if (double* ga = detail::sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * c;
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_result("sum", {1}, {s}, {a}, [](Node& self) {
    if (double* ga = detail::sink(self, 0)) {
      const double g = self.grad[0];
      for (std::size_t i = 0; i < self.inputs[0]->data.size(); ++i) ga[i] += g;
    }
  });
}

inline Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

/// Column means of an [n x d] matrix, giving a [d] vector.
inline Tensor mean_rows(const Tensor& a) {
  detail::require_rank(a, 2, "mean_rows");
  const std::size_t n = a.dim(0), d = a.dim(1);
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += a[i * d + j];
  for (auto& v : out) v /= static_cast<double>(n);
  return Tensor::make_result("mean_rows", {d}, std::move(out), {a}, [n, d](Node& self) {
    if (double* ga = detail::sink(self, 0)) {
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) ga[i * d + j] += self.grad[j] * inv;
    }
  });
}

// ---------------------------------------------------------------------------
// Activations

inline Tensor tanh(const Tensor& x) {
  return detail::unary("tanh", x, [](double v) { return std::tanh(v); },
                       [](double, double y) { return 1.0 - y * y; });
}

inline double sigmoid_value(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary("sigmoid", x, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                       [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

/// GELU, tanh approximation.
inline Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  return detail::unary(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + k * v * v * v))); },
      [](double v, double) {
        const double u = c * (v + k * v * v * v);
        const double t = std::tanh(u);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * k * v * v);
      });
}

/// x * sigmoid(x).
inline Tensor silu(const Tensor& x) {
  return detail::unary("silu", x, [](double v) { return v * sigmoid_value(v); },
                       [](double v, double) {
                         const double s = sigmoid_value(v);
                         return s * (1.0 + v * (1.0 - s));
                       });
}

inline Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw NumericalError("log of non-positive value");
  }
  return detail::unary("log", x, [](double v) { return std::log(v); },
                       [](double v, double) { return 1.0 / v; });
}

/// Clamp into [lo, hi]; gradient passes only where the input was inside.
inline Tensor clamp(const Tensor& x, double lo, double hi) {
  return detail::unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
                       [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

enum class Activation { tanh, sigmoid, gelu, relu, silu };

inline Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "gelu") return Activation::gelu;
  if (name == "relu") return Activation::relu;
  if (name == "silu") return Activation::silu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

inline Tensor activation(Activation kind, const Tensor& x) {
  switch (kind) {
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::gelu: return gelu(x);
    case Activation::relu: return relu(x);
    case Activation::silu: return silu(x);
  }
  throw ConfigError("unknown activation kind");
}

inline Tensor activation(std::string_view kind, const Tensor& x) {
  return activation(parse_activation(kind), x);
}

// ---------------------------------------------------------------------------
// Normalization

/// Softmax along `axis`, max-subtracted.
inline Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_string(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t n = x.dim(axis);
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t r = 0; r < inner; ++r) {
      const std::size_t base = o * n * inner + r;
      double mx = in[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(in[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  }
  return Tensor::make_result("softmax", x.shape(), std::move(out), {x}, [outer, inner, n](Node& self) {
    double* gx = detail::sink(self, 0);
    if (!gx) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t r = 0; r < inner; ++r) {
        const std::size_t base = o * n * inner + r;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Per-row normalization over the last axis, then gain * xhat + bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double epsilon = kLayerNormEpsilon) {
  const std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d || gain.rank() != 1 || bias.rank() != 1) {
    throw DimensionError("layer_norm: gain/bias must be [" + std::to_string(d) + "], got " +
                         shape_string(gain.shape()) + " and " + shape_string(bias.shape()));
  }
  const std::size_t rows = x.size() / d;
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(rows);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * inv_std[r];
      out[r * d + j] = gain[j] * xhat[r * d + j] + bias[j];
    }
  }
  return Tensor::make_result(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& gamma = self.inputs[1]->data;
        const auto& g = self.grad;
        double* gx = detail::sink(self, 0);
        double* gg = detail::sink(self, 1);
        double* gb = detail::sink(self, 2);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_gh = 0.0, mean_ghx = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const std::size_t idx = r * d + j;
            const double gh = g[idx] * gamma[j];
            mean_gh += gh;
            mean_ghx += gh * xhat[idx];
            if (gg) gg[j] += g[idx] * xhat[idx];
            if (gb) gb[j] += g[idx];
          }
          mean_gh /= static_cast<double>(d);
          mean_ghx /= static_cast<double>(d);
          if (gx) {
            for (std::size_t j = 0; j < d; ++j) {
              const std::size_t idx = r * d + j;
              gx[idx] += inv_std[r] * (g[idx] * gamma[j] - mean_gh - xhat[idx] * mean_ghx);
            }
          }
        }
      });
}

/// Inverted dropout. Identity when `training` is false or rate is 0.
inline Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = x[i] * mask[i];
  }
  return Tensor::make_result("dropout", x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    if (double* gx = detail::sink(self, 0)) {
      for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += self.grad[i] * mask[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Slicing and assembly

/// Columns [start, start + count) of an [n x m] matrix.
inline Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  detail::require_rank(a, 2, "slice_cols");
  const std::size_t n = a.dim(0), m = a.dim(1);
  if (count == 0 || start + count > m) throw DimensionError("slice_cols: range outside " + shape_string(a.shape()));
  std::vector<double> out(n * count);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = a[i * m + start + j];
  return Tensor::make_result("slice_cols", {n, count}, std::move(out), {a}, [n, m, start, count](Node& self) {
    if (double* ga = detail::sink(self, 0)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < count; ++j) ga[i * m + start + j] += self.grad[i * count + j];
    }
  });
}

/// Rows [start, start + count) of an [n x m] matrix.
inline Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  detail::require_rank(a, 2, "slice_rows");
  const std::size_t n = a.dim(0), m = a.dim(1);
  if (count == 0 || start + count > n) throw DimensionError("slice_rows: range outside " + shape_string(a.shape()));
  std::vector<double> out(a.data().begin() + static_cast<std::ptrdiff_t>(start * m),
                          a.data().begin() + static_cast<std::ptrdiff_t>((start + count) * m));
  return Tensor::make_result("slice_rows", {count, m}, std::move(out), {a}, [start, m](Node& self) {
    if (double* ga = detail::sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[start * m + i] += self.grad[i];
    }
  });
}

/// Side-by-side concatenation of matrices with equal row counts.
inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts.front().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_rank(p, 2, "concat_cols");
    if (p.dim(0) != n) throw DimensionError("concat_cols: row count mismatch");
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = parts[k][i * widths[k] + j];
    offset += widths[k];
  }
  return Tensor::make_result("concat_cols", {n, total}, std::move(out), parts, [n, total, widths](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (double* g = detail::sink(self, k)) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += self.grad[i * total + offset + j];
      }
      offset += widths[k];
    }
  });
}

/// Flat concatenation into a rank-1 vector, in argument order.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  std::vector<double> out;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    sizes.push_back(p.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const std::size_t total = out.size();
  return Tensor::make_result("concat", {total}, std::move(out), parts, [sizes](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (double* g = detail::sink(self, k)) {
        for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += self.grad[offset + i];
      }
      offset += sizes[k];
    }
  });
}

/// Stacks equal-length vectors as rows of an [M x d] matrix.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const std::size_t d = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != d) {
      throw DimensionError("stack_rows: row of size " + std::to_string(r.size()) + ", expected " + std::to_string(d));
    }
  }
  return reshape(concat(rows), {rows.size(), d});
}

// ---------------------------------------------------------------------------
// Loss

/// Mean binary cross-entropy of probabilities `p` against 0/1 `labels`.
/// `p` must already lie strictly inside (0, 1).
inline Tensor binary_cross_entropy(const Tensor& p, const std::vector<double>& labels) {
  if (p.size() != labels.size()) {
    throw DimensionError("binary_cross_entropy: " + std::to_string(p.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const double n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double q = p[i];
    if (!(q > 0.0 && q < 1.0)) throw NumericalError("binary_cross_entropy: probability outside (0, 1)");
    loss -= labels[i] * std::log(q) + (1.0 - labels[i]) * std::log(1.0 - q);
  }
  return Tensor::make_result("bce", {1}, {loss / n}, {p}, [labels, n](Node& self) {
    if (double* gp = detail::sink(self, 0)) {
      const auto& P = self.inputs[0]->data;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        gp[i] += self.grad[0] * (P[i] - labels[i]) / (P[i] * (1.0 - P[i])) / n;
      }
    }
  });
}

}  // namespace gazefuse::ops
