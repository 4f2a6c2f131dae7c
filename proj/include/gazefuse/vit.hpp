#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/ops.hpp"
#include "gazefuse/parameters.hpp"
#include "gazefuse/rng.hpp"
#include "gazefuse/tensor.hpp"

namespace gazefuse::vit {

struct ViTConfig {
  std::size_t window = 4;     // token rows per patch
  std::size_t input_dim = 4;  // features per token row
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t mlp_ratio = 4;
  double dropout = 0.1;
  std::size_t max_patches = 64;
  double init_std = 0.02;

  std::size_t patch_dim() const { return window * input_dim; }
  std::size_t head_dim() const { return d_model / heads; }

  void validate() const {
    if (window == 0) throw ConfigError("vit window must be >= 1");
    if (input_dim == 0) throw ConfigError("vit input dim must be >= 1");
    if (layers == 0) throw ConfigError("vit needs at least one layer");
    if (heads == 0 || d_model == 0 || d_model % heads != 0) {
      throw ConfigError("vit d_model (" + std::to_string(d_model) + ") must be divisible by heads (" +
                        std::to_string(heads) + ")");
    }
    if (mlp_ratio == 0) throw ConfigError("vit mlp ratio must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("vit dropout must be in [0, 1)");
    if (max_patches == 0) throw ConfigError("vit positional table needs at least one row");
  }
};

struct BlockParams {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2_gain, ln2_bias;
  Tensor w1, b1, w2, b2;
};

struct ViTParams {
  Tensor proj;  // [patch_dim x d_model]
  Tensor pos;   // [max_patches x d_model]
  std::vector<BlockParams> blocks;
  Tensor final_gain, final_bias;

  static ViTParams init(const ViTConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.d_model, hidden = cfg.d_model * cfg.mlp_ratio;
    const double s = cfg.init_std;
    ViTParams p;
    p.proj = init::gaussian({cfg.patch_dim(), d}, s, rng);
    p.pos = init::zeros({cfg.max_patches, d});
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      BlockParams b;
      b.ln1_gain = init::ones({d});
      b.ln1_bias = init::zeros({d});
      b.wq = init::gaussian({d, d}, s, rng);
      b.bq = init::zeros({d});
      b.wk = init::gaussian({d, d}, s, rng);
      b.bk = init::zeros({d});
      b.wv = init::gaussian({d, d}, s, rng);
      b.bv = init::zeros({d});
      b.wo = init::gaussian({d, d}, s, rng);
      b.bo = init::zeros({d});
      b.ln2_gain = init::ones({d});
      b.ln2_bias = init::zeros({d});
      b.w1 = init::gaussian({d, hidden}, s, rng);
      b.b1 = init::zeros({hidden});
      b.w2 = init::gaussian({hidden, d}, s, rng);
      b.b2 = init::zeros({d});
      p.blocks.push_back(std::move(b));
    }
    p.final_gain = init::ones({d});
    p.final_bias = init::zeros({d});
    return p;
  }

  void collect(ParameterSet& set, const std::string& prefix) const {
    set.add(prefix + "proj", proj);
    set.add(prefix + "pos", pos);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const auto& b = blocks[l];
      const std::string p = prefix + "block" + std::to_string(l) + ".";
      set.add(p + "ln1.gain", b.ln1_gain);
      set.add(p + "ln1.bias", b.ln1_bias);
      set.add(p + "wq", b.wq);
      set.add(p + "bq", b.bq);
      set.add(p + "wk", b.wk);
      set.add(p + "bk", b.bk);
      set.add(p + "wv", b.wv);
      set.add(p + "bv", b.bv);
      set.add(p + "wo", b.wo);
      set.add(p + "bo", b.bo);
      set.add(p + "ln2.gain", b.ln2_gain);
      set.add(p + "ln2.bias", b.ln2_bias);
      set.add(p + "mlp.w1", b.w1);
      set.add(p + "mlp.b1", b.b1);
      set.add(p + "mlp.w2", b.w2);
      set.add(p + "mlp.b2", b.b2);
    }
    set.add(prefix + "final.gain", final_gain);
    set.add(prefix + "final.bias", final_bias);
  }
};

/// Consecutive windows of `w` rows, each flattened row-major into one patch.
/// The last window is zero-padded when T is not a multiple of w.
inline Tensor patchify(const Tensor& x, std::size_t w) {
  if (x.rank() != 2) throw DimensionError("patchify expects [T x d], got " + shape_string(x.shape()));
  if (w == 0) throw ConfigError("patch window must be >= 1");
  const std::size_t t = x.dim(0), d = x.dim(1);
  if (t == 0) throw DimensionError("patchify needs at least one row");
  const std::size_t n = (t + w - 1) / w;
  const std::size_t len = t * d;
  std::vector<double> out(n * w * d, 0.0);
  std::copy(x.data().begin(), x.data().end(), out.begin());
  return Tensor::make_result("patchify", {n, w * d}, std::move(out), {x}, [len](ops::Node& self) {
    if (double* gx = ops::detail::sink(self, 0)) {
      for (std::size_t i = 0; i < len; ++i) gx[i] += self.grad[i];
    }
  });
}

/// z0 = patches * E_proj + E_pos[0..N].
inline Tensor embed(const Tensor& patches, const ViTParams& p) {
  const std::size_t n = patches.dim(0);
  if (n > p.pos.dim(0)) {
    throw SequenceTooLongError("sequence has " + std::to_string(n) + " patches, positional table holds " +
                               std::to_string(p.pos.dim(0)));
  }
  return ops::add(ops::matmul(patches, p.proj), ops::slice_rows(p.pos, 0, n));
}

inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return ops::add(ops::matmul(x, w), b); }

/// Multi-head scaled dot-product attention over LN'd input. When `weights`
/// is given it receives one [N x N] attention matrix per head.
inline Tensor multi_head_attention(const Tensor& x, const BlockParams& b, std::size_t heads,
                                   std::vector<Tensor>* weights = nullptr) {
  const std::size_t d = x.dim(1), dk = d / heads;
  const Tensor q = linear(x, b.wq, b.bq);
  const Tensor k = linear(x, b.wk, b.bk);
  const Tensor v = linear(x, b.wv, b.bv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = ops::slice_cols(q, h * dk, dk);
    const Tensor kh = ops::slice_cols(k, h * dk, dk);
    const Tensor vh = ops::slice_cols(v, h * dk, dk);
    const Tensor a = ops::softmax(ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt), 1);
    if (weights) weights->push_back(a);
    outs.push_back(ops::matmul(a, vh));
  }
  const Tensor merged = heads == 1 ? outs.front() : ops::concat_cols(outs);
  return linear(merged, b.wo, b.bo);
}

/// Pre-norm block: z + Attn(LN(z)), then + MLP(LN(.)).
inline Tensor self_attention(const Tensor& z, const BlockParams& b, const ViTConfig& cfg, bool training, Rng& rng,
                             std::vector<Tensor>* weights = nullptr) {
  const Tensor attn = multi_head_attention(ops::layer_norm(z, b.ln1_gain, b.ln1_bias), b, cfg.heads, weights);
  const Tensor z1 = ops::add(z, ops::dropout(attn, cfg.dropout, training, rng));
  const Tensor hidden = ops::gelu(linear(ops::layer_norm(z1, b.ln2_gain, b.ln2_bias), b.w1, b.b1));
  const Tensor mlp = linear(hidden, b.w2, b.b2);
  return ops::add(z1, ops::dropout(mlp, cfg.dropout, training, rng));
}

/// patchify -> embed -> blocks -> final layer norm. Returns [N x d_model].
inline Tensor encode(const Tensor& x, const ViTConfig& cfg, const ViTParams& p, bool training, Rng& rng) {
  if (x.rank() != 2 || x.dim(1) != cfg.input_dim) {
    throw DimensionError("vit encode expects [T x " + std::to_string(cfg.input_dim) + "], got " +
                         shape_string(x.shape()));
  }
  Tensor z = embed(patchify(x, cfg.window), p);
  for (const auto& b : p.blocks) z = self_attention(z, b, cfg, training, rng);
  return ops::layer_norm(z, p.final_gain, p.final_bias);
}

}  // namespace gazefuse::vit
