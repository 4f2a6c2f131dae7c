#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gazefuse/dataset.hpp"
#include "gazefuse/errors.hpp"
#include "gazefuse/features.hpp"
#include "gazefuse/gaze/cohort.hpp"
#include "gazefuse/model.hpp"
#include "gazefuse/training.hpp"

namespace gazefuse::config {

// Every recognised key with its default, in the order the resolved file lists them.
inline const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      {"seed", "7"},
      {"out", "out"},
      {"cohort.dir", ""},
      {"cohort.subjects", "64"},
      {"cohort.stimuli", "4"},
      {"cohort.class_gap", "1"},
      {"cohort.min_fixations", "14"},
      {"cohort.max_fixations", "22"},
      {"cohort.speech_dim", "8"},
      {"cohort.visual_dim", "12"},
      {"features.grid_rows", "4"},
      {"features.grid_cols", "4"},
      {"features.rqa_epsilon", "0.05"},
      {"features.unvisited_rows", "uniform"},
      {"split.train", "0.7"},
      {"split.val", "0.15"},
      {"split.test", "0.15"},
      {"split.stratified", "true"},
      {"model.window", "4"},
      {"model.d_model", "64"},
      {"model.heads", "4"},
      {"model.layers", "2"},
      {"model.mlp_ratio", "4"},
      {"model.max_patches", "64"},
      {"model.d_state", "8"},
      {"model.ssm_blocks", "2"},
      {"model.scan", "sequential"},
      {"model.d_f", "64"},
      {"model.d_a", "32"},
      {"model.fusion", "hybrid"},
      {"model.temporal_features", "true"},
      {"model.dropout", "0.1"},
      {"train.optimizer", "adam"},
      {"train.learning_rate", "0.001"},
      {"train.beta1", "0.9"},
      {"train.beta2", "0.999"},
      {"train.epsilon", "1e-08"},
      {"train.momentum", "0.9"},
      {"train.weight_decay", "0.0001"},
      {"train.epochs", "200"},
      {"train.batch_size", "16"},
      {"train.patience", "20"},
      {"eval.model", ""},
      {"eval.split", "test"},
      {"eval.threshold", "0.5"},
      {"ablate.arms", ""},
  };
  return d;
}

/// Merged key/value configuration. Later sources override earlier ones:
/// defaults, then the config file, then command-line flags.
class RunConfig {
 public:
  RunConfig() {
    for (const auto& [k, v] : defaults()) values_[k] = v;
  }

  static bool known(const std::string& key) {
    for (const auto& [k, _] : defaults()) {
      if (k == key) return true;
    }
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// Parses `key = value` lines. Blank lines and lines starting with '#' are ignored.
  void merge_text(const std::string& text, const std::string& origin = "config") {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto body = trim(line);
      if (body.empty() || body[0] == '#') continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
      }
      const auto key = trim(body.substr(0, eq));
      try {
        set(key, trim(body.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  void merge_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    merge_text(ss.str(), path.string());
  }

  /// `key=value` override as given on the command line.
  void merge_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    const auto& s = str(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError(key + ": expected a nonnegative integer, got '" + s + "'");
    return v;
  }

  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

  double real(const std::string& key) const {
    const auto& s = str(key);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError(key + ": expected a number, got '" + s + "'");
    return v;
  }

  bool flag(const std::string& key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
  }

  /// The resolved configuration in canonical key order.
  std::string to_text() const {
    std::string out;
    for (const auto& [k, _] : defaults()) out += k + " = " + values_.at(k) + "\n";
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Views onto the library configuration structs

inline gaze::CohortConfig cohort_config(const RunConfig& rc) {
  gaze::CohortConfig c;
  const std::size_t n = rc.size("cohort.subjects");
  c.n_asd = (n + 1) / 2;
  c.n_td = n / 2;
  c.stimuli = rc.size("cohort.stimuli");
  c.class_gap = rc.real("cohort.class_gap");
  c.min_fixations = rc.size("cohort.min_fixations");
  c.max_fixations = rc.size("cohort.max_fixations");
  c.speech_dim = rc.size("cohort.speech_dim");
  c.visual_dim = rc.size("cohort.visual_dim");
  c.validate();
  return c;
}

inline features::FeatureConfig feature_config(const RunConfig& rc) {
  features::FeatureConfig c;
  c.grid.rows = rc.size("features.grid_rows");
  c.grid.cols = rc.size("features.grid_cols");
  if (c.grid.rows == 0 || c.grid.cols == 0) throw ConfigError("feature grid must have at least one row and column");
  c.rqa_epsilon = rc.real("features.rqa_epsilon");
  if (!(c.rqa_epsilon > 0.0)) throw ConfigError("features.rqa_epsilon must be positive");
  c.policy = features::parse_policy(rc.str("features.unvisited_rows"));
  return c;
}

inline data::SplitConfig split_config(const RunConfig& rc) {
  data::SplitConfig c;
  c.train = rc.real("split.train");
  c.val = rc.real("split.val");
  c.test = rc.real("split.test");
  c.stratified = rc.flag("split.stratified");
  c.seed = rc.u64("seed");
  c.validate();
  return c;
}

/// Model hyperparameters; the input widths are filled in from the data.
inline model::ModelConfig model_config(const RunConfig& rc) {
  model::ModelConfig c;
  c.vit.window = rc.size("model.window");
  c.vit.d_model = rc.size("model.d_model");
  c.vit.heads = rc.size("model.heads");
  c.vit.layers = rc.size("model.layers");
  c.vit.mlp_ratio = rc.size("model.mlp_ratio");
  c.vit.max_patches = rc.size("model.max_patches");
  c.ssm.d_model = c.vit.d_model;
  c.ssm.d_state = rc.size("model.d_state");
  c.ssm.blocks = rc.size("model.ssm_blocks");
  c.ssm.mode = ssm::parse_scan_mode(rc.str("model.scan"));
  c.d_f = rc.size("model.d_f");
  c.d_a = rc.size("model.d_a");
  c.fusion = fusion::parse_strategy(rc.str("model.fusion"));
  c.temporal_features = rc.flag("model.temporal_features");
  c.dropout = rc.real("model.dropout");
  return c;
}

inline train::TrainConfig train_config(const RunConfig& rc) {
  train::TrainConfig c;
  c.optimizer.kind = parse_optimizer(rc.str("train.optimizer"));
  c.optimizer.learning_rate = rc.real("train.learning_rate");
  c.optimizer.beta1 = rc.real("train.beta1");
  c.optimizer.beta2 = rc.real("train.beta2");
  c.optimizer.epsilon = rc.real("train.epsilon");
  c.optimizer.momentum = rc.real("train.momentum");
  c.optimizer.weight_decay = rc.real("train.weight_decay");
  c.epochs = rc.size("train.epochs");
  c.batch_size = rc.size("train.batch_size");
  c.patience = rc.size("train.patience");
  c.seed = rc.u64("seed");
  c.validate();
  return c;
}

/// Feature settings travel with the checkpoint so evaluation rebuilds the
/// same inputs the model was trained on.
inline void write_feature_header(std::map<std::string, std::string>& header, const features::FeatureConfig& c) {
  header["features.grid_rows"] = std::to_string(c.grid.rows);
  header["features.grid_cols"] = std::to_string(c.grid.cols);
  header["features.rqa_epsilon"] = gaze::detail::format_double(c.rqa_epsilon);
  header["features.unvisited_rows"] = features::policy_name(c.policy);
}

inline features::FeatureConfig feature_config_from_header(const Checkpoint& ck) {
  RunConfig rc;
  for (const char* k : {"features.grid_rows", "features.grid_cols", "features.rqa_epsilon", "features.unvisited_rows"}) {
    rc.set(k, ck.header_value(k));
  }
  return feature_config(rc);
}

}  // namespace gazefuse::config
