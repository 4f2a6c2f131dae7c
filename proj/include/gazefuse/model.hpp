#pragma once

#include <array>
#include <charconv>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/checkpoint.hpp"
#include "gazefuse/dataset.hpp"
#include "gazefuse/errors.hpp"
#include "gazefuse/features.hpp"
#include "gazefuse/fusion.hpp"
#include "gazefuse/ops.hpp"
#include "gazefuse/parameters.hpp"
#include "gazefuse/ssm.hpp"
#include "gazefuse/vit.hpp"

namespace gazefuse::model {

inline constexpr std::array<std::string_view, 3> kModalityNames = {"gaze", "speech", "visual"};

struct ModelConfig {
  vit::ViTConfig vit;
  ssm::SsmConfig ssm;
  std::size_t d_f = 64;
  std::size_t d_a = 32;
  fusion::Strategy fusion = fusion::Strategy::hybrid;
  bool temporal_features = true;
  double dropout = 0.1;
  // Input widths, fixed by the data.
  std::size_t engineered_dim = 0;
  std::size_t speech_dim = 0;
  std::size_t visual_dim = 0;

  void validate() const {
    vit.validate();
    ssm.validate();
    if (vit.input_dim != data::kTokenDim) throw ConfigError("vit input dim must equal the token width (4)");
    if (ssm.d_model != vit.d_model) throw ConfigError("ssm d_model must equal vit d_model");
    if (d_f == 0 || d_a == 0) throw ConfigError("fusion dimensions must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (engineered_dim <= features::kScalarFeatureNames.size() || speech_dim == 0 || visual_dim == 0) {
      throw ConfigError("model input widths are not set");
    }
  }
};

/// Engineered-feature columns the model consumes. The reduced arm drops
/// saccadic speed and fixation entropy.
inline std::vector<std::size_t> kept_features(std::size_t engineered_dim, bool temporal) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < engineered_dim; ++i) {
    bool drop = false;
    for (auto t : features::kTemporalFeatureIndices) drop = drop || (!temporal && i == t);
    if (!drop) keep.push_back(i);
  }
  return keep;
}

namespace detail {

inline std::string fmt(double v) { return gaze::detail::format_double(v); }

inline std::size_t to_size(const std::string& s, const std::string& key) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw IoError("bad integer for '" + key + "': " + s);
  return v;
}

inline double to_double(const std::string& s, const std::string& key) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw IoError("bad number for '" + key + "': " + s);
  return v;
}

}  // namespace detail

inline std::map<std::string, std::string> config_header(const ModelConfig& c) {
  using detail::fmt;
  return {
      {"model.window", std::to_string(c.vit.window)},
      {"model.d_model", std::to_string(c.vit.d_model)},
      {"model.heads", std::to_string(c.vit.heads)},
      {"model.layers", std::to_string(c.vit.layers)},
      {"model.mlp_ratio", std::to_string(c.vit.mlp_ratio)},
      {"model.max_patches", std::to_string(c.vit.max_patches)},
      {"model.d_state", std::to_string(c.ssm.d_state)},
      {"model.ssm_blocks", std::to_string(c.ssm.blocks)},
      {"model.scan", ssm::scan_mode_name(c.ssm.mode)},
      {"model.d_f", std::to_string(c.d_f)},
      {"model.d_a", std::to_string(c.d_a)},
      {"model.fusion", fusion::strategy_name(c.fusion)},
      {"model.temporal_features", c.temporal_features ? "true" : "false"},
      {"model.dropout", fmt(c.dropout)},
      {"model.engineered_dim", std::to_string(c.engineered_dim)},
      {"model.speech_dim", std::to_string(c.speech_dim)},
      {"model.visual_dim", std::to_string(c.visual_dim)},
  };
}

inline ModelConfig config_from_header(const Checkpoint& ck) {
  auto size = [&](const char* k) { return detail::to_size(ck.header_value(k), k); };
  ModelConfig c;
  c.vit.window = size("model.window");
  c.vit.d_model = size("model.d_model");
  c.vit.heads = size("model.heads");
  c.vit.layers = size("model.layers");
  c.vit.mlp_ratio = size("model.mlp_ratio");
  c.vit.max_patches = size("model.max_patches");
  c.ssm.d_model = c.vit.d_model;
  c.ssm.d_state = size("model.d_state");
  c.ssm.blocks = size("model.ssm_blocks");
  c.ssm.mode = ssm::parse_scan_mode(ck.header_value("model.scan"));
  c.d_f = size("model.d_f");
  c.d_a = size("model.d_a");
  c.fusion = fusion::parse_strategy(ck.header_value("model.fusion"));
  c.temporal_features = ck.header_value("model.temporal_features") == "true";
  c.dropout = detail::to_double(ck.header_value("model.dropout"), "model.dropout");
  c.vit.dropout = c.dropout;
  c.engineered_dim = size("model.engineered_dim");
  c.speech_dim = size("model.speech_dim");
  c.visual_dim = size("model.visual_dim");
  return c;
}

/// Standardization statistics, fitted on the training split.
struct Normalization {
  data::Standardizer tokens, engineered, speech, visual;

  static Normalization fit(const std::vector<data::Example>& train) {
    if (train.empty()) throw InsufficientDataError("cannot fit normalization on an empty training split");
    std::vector<const std::vector<double>*> t, e, s, v;
    for (const auto& ex : train) {
      t.push_back(&ex.tokens);
      e.push_back(&ex.engineered);
      s.push_back(&ex.speech);
      v.push_back(&ex.visual);
    }
    const auto& first = train.front();
    return {data::Standardizer::fit(t, data::kTokenDim), data::Standardizer::fit(e, first.engineered.size()),
            data::Standardizer::fit(s, first.speech.size()), data::Standardizer::fit(v, first.visual.size())};
  }
};

/// Model inputs after standardization and feature selection.
struct Prepared {
  std::string subject_id;
  std::string stimulus_id;
  int label = 0;
  Tensor tokens;      // [T x 4]
  Tensor engineered;  // [kept features]
  Tensor speech;
  Tensor visual;
};

struct Forward {
  Tensor prob;   // [1], clamped
  Tensor score;  // [1], pre-sigmoid score used for saliency
  Tensor alpha;  // [M] attention weights (hybrid only)
  bool has_alpha = false;
};

/// Spatial encoder -> temporal encoder -> pooled gaze vector, fused with
/// the speech and visual stand-ins by the configured strategy.
class HybridModel {
 public:
  HybridModel(ModelConfig cfg, Normalization norm, std::uint64_t seed) : cfg_(std::move(cfg)), norm_(std::move(norm)) {
    cfg_.vit.dropout = cfg_.dropout;
    cfg_.ssm.d_model = cfg_.vit.d_model;
    cfg_.validate();
    keep_ = kept_features(cfg_.engineered_dim, cfg_.temporal_features);
    Rng root = Rng(seed).split("init");
    Rng vit_rng = root.split("vit");
    Rng ssm_rng = root.split("ssm");
    Rng head_rng = root.split("fusion");
    vit_ = vit::ViTParams::init(cfg_.vit, vit_rng);
    ssm_ = ssm::SsmParams::init(cfg_.ssm, ssm_rng);
    const std::size_t in_dims[3] = {cfg_.vit.d_model + keep_.size(), cfg_.speech_dim, cfg_.visual_dim};
    for (std::size_t m = 0; m < 3; ++m) {
      proj_w_.push_back(init::gaussian({in_dims[m], cfg_.d_f}, 1.0 / std::sqrt(static_cast<double>(in_dims[m])), head_rng));
      proj_b_.push_back(init::zeros({cfg_.d_f}));
    }
    const double cls_std = 0.02;
    switch (cfg_.fusion) {
      case fusion::Strategy::hybrid:
        W_ = init::gaussian({cfg_.d_a, cfg_.d_f}, 1.0 / std::sqrt(static_cast<double>(cfg_.d_f)), head_rng);
        w_ = init::gaussian({cfg_.d_a}, 1.0 / std::sqrt(static_cast<double>(cfg_.d_a)), head_rng);
        heads_w_.push_back(init::gaussian({cfg_.d_f}, cls_std, head_rng));
        heads_b_.push_back(init::zeros({1}));
        break;
      case fusion::Strategy::early:
        heads_w_.push_back(init::gaussian({3 * cfg_.d_f}, cls_std, head_rng));
        heads_b_.push_back(init::zeros({1}));
        break;
      case fusion::Strategy::late:
        for (std::size_t m = 0; m < 3; ++m) {
          heads_w_.push_back(init::gaussian({cfg_.d_f}, cls_std, head_rng));
          heads_b_.push_back(init::zeros({1}));
        }
        break;
    }
    collect();
  }

  const ModelConfig& config() const { return cfg_; }
  const Normalization& normalization() const { return norm_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  Prepared prepare(const data::Example& ex, bool track_inputs = false) const {
    if (ex.engineered.size() != cfg_.engineered_dim || ex.speech.size() != cfg_.speech_dim ||
        ex.visual.size() != cfg_.visual_dim) {
      throw DimensionError("example " + ex.subject_id + "/" + ex.stimulus_id + " does not match the model input widths");
    }
    if (ex.token_rows == 0) throw InsufficientDataError("example has no fixations");
    const auto eng = norm_.engineered.apply(ex.engineered);
    std::vector<double> kept;
    kept.reserve(keep_.size());
    for (auto i : keep_) kept.push_back(eng[i]);
    Prepared p;
    p.subject_id = ex.subject_id;
    p.stimulus_id = ex.stimulus_id;
    p.label = ex.label;
    p.tokens = Tensor::from({ex.token_rows, data::kTokenDim}, norm_.tokens.apply(ex.tokens));
    p.engineered = Tensor::vector(std::move(kept), track_inputs);
    p.speech = Tensor::vector(norm_.speech.apply(ex.speech), track_inputs);
    p.visual = Tensor::vector(norm_.visual.apply(ex.visual), track_inputs);
    return p;
  }

  Forward forward(const Prepared& in, bool training, Rng& rng) const {
    const Tensor h_vit = vit::encode(in.tokens, cfg_.vit, vit_, training, rng);
    const Tensor h_mamba = ssm::encode_temporal(h_vit, cfg_.ssm, ssm_);
    const Tensor gaze = ops::concat({ssm::pool(h_mamba), in.engineered});
    const Tensor raw[3] = {gaze, in.speech, in.visual};
    std::vector<Tensor> projected;
    for (std::size_t m = 0; m < 3; ++m) {
      const Tensor row = ops::reshape(raw[m], {1, raw[m].size()});
      projected.push_back(ops::reshape(ops::add(ops::matmul(row, proj_w_[m]), proj_b_[m]), {cfg_.d_f}));
    }
    Forward out;
    switch (cfg_.fusion) {
      case fusion::Strategy::hybrid: {
        auto r = fusion::attention_fusion(projected, W_, w_);
        out.alpha = r.alpha;
        out.has_alpha = true;
        out.score = fusion::logit(ops::dropout(r.fused, cfg_.dropout, training, rng), heads_w_[0], heads_b_[0]);
        out.prob = fusion::clamp_probability(ops::sigmoid(out.score));
        break;
      }
      case fusion::Strategy::early: {
        const Tensor f = fusion::early_fusion(projected);
        out.score = fusion::logit(ops::dropout(f, cfg_.dropout, training, rng), heads_w_[0], heads_b_[0]);
        out.prob = fusion::clamp_probability(ops::sigmoid(out.score));
        break;
      }
      case fusion::Strategy::late: {
        std::vector<Tensor> probs;
        for (std::size_t m = 0; m < 3; ++m) {
          const Tensor f = ops::dropout(projected[m], cfg_.dropout, training, rng);
          probs.push_back(fusion::classify(f, heads_w_[m], heads_b_[m]));
        }
        out.prob = fusion::late_fusion(probs);
        // log-odds of the averaged probability
        out.score = ops::sub(ops::log(out.prob), ops::log(ops::sub(Tensor::scalar(1.0), out.prob)));
        break;
      }
    }
    return out;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.header = config_header(cfg_);
    ck.header["precision"] = "float64";
    ck.add_all(params_);
    auto add_norm = [&](const std::string& name, const data::Standardizer& s) {
      ck.add("norm." + name + ".mean", Tensor::vector(s.mean));
      ck.add("norm." + name + ".scale", Tensor::vector(s.scale));
    };
    add_norm("tokens", norm_.tokens);
    add_norm("engineered", norm_.engineered);
    add_norm("speech", norm_.speech);
    add_norm("visual", norm_.visual);
    return ck;
  }

  static HybridModel from_checkpoint(const Checkpoint& ck) {
    auto get_norm = [&](const std::string& name) {
      return data::Standardizer{ck.get("norm." + name + ".mean").values, ck.get("norm." + name + ".scale").values};
    };
    Normalization norm{get_norm("tokens"), get_norm("engineered"), get_norm("speech"), get_norm("visual")};
    HybridModel m(config_from_header(ck), std::move(norm), 0);
    ck.load_into(m.params_);
    return m;
  }

 private:
  void collect() {
    vit_.collect(params_, "vit.");
    ssm_.collect(params_, "ssm.");
    for (std::size_t m = 0; m < 3; ++m) {
      const std::string name(kModalityNames[m]);
      params_.add("proj." + name + ".w", proj_w_[m]);
      params_.add("proj." + name + ".b", proj_b_[m]);
    }
    if (cfg_.fusion == fusion::Strategy::hybrid) {
      params_.add("fusion.W", W_);
      params_.add("fusion.w", w_);
    }
    for (std::size_t k = 0; k < heads_w_.size(); ++k) {
      const std::string p = heads_w_.size() == 1 ? "head." : "head." + std::string(kModalityNames[k]) + ".";
      params_.add(p + "w", heads_w_[k]);
      params_.add(p + "b", heads_b_[k]);
    }
  }

  ModelConfig cfg_;
  Normalization norm_;
  std::vector<std::size_t> keep_;
  vit::ViTParams vit_;
  ssm::SsmParams ssm_;
  std::vector<Tensor> proj_w_, proj_b_;
  Tensor W_, w_;
  std::vector<Tensor> heads_w_, heads_b_;
  ParameterSet params_;
};

}  // namespace gazefuse::model
