// gazefuse: synthetic cohorts, features, training, evaluation and ablation.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "gazefuse/config.hpp"
#include "gazefuse/gaze/cohort_io.hpp"

namespace fs = std::filesystem;
using namespace gazefuse;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

const char* const kResolvedConfig = "resolved.conf";
const char* const kCheckpoint = "checkpoint.bin";
const char* const kSplitFile = "split.json";

bool g_verbose = false;

void note(const std::string& msg) {
  if (g_verbose) std::cerr << msg << '\n';
}

std::string fmt(double v) { return gaze::detail::format_double(v); }

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_file(const fs::path& path, const std::string& text) { gaze::write_text_file(path, text); }

void write_resolved(const config::RunConfig& rc, const fs::path& dir) {
  write_file(dir / kResolvedConfig, rc.to_text());
}

struct LoadedData {
  gaze::Cohort cohort;
  data::BuildResult built;
};

LoadedData load_examples(const config::RunConfig& rc, const features::FeatureConfig& fc) {
  const auto& dir = rc.str("cohort.dir");
  if (dir.empty()) throw UsageError("no cohort given; pass --cohort <dir>");
  auto loaded = gaze::read_cohort(dir);
  if (loaded.warnings) std::cerr << "warning: " << loaded.warnings << " malformed scanpath rows skipped\n";
  LoadedData out{std::move(loaded.cohort), {}};
  out.built = data::build_examples(out.cohort, fc);
  if (out.built.skipped) {
    std::cerr << "warning: " << out.built.skipped << " scanpaths skipped during feature extraction\n";
    for (const auto& m : out.built.messages) note("  " + m);
  }
  if (out.built.examples.empty()) throw InsufficientDataError("no usable scanpaths in cohort '" + dir + "'");
  return out;
}

json split_json(const data::Split& s) {
  json j;
  j["hash"] = s.hash();
  j["train"] = s.train;
  j["val"] = s.val;
  j["test"] = s.test;
  return j;
}

data::Split read_split(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing split file '" + path.string() + "'");
  try {
    const auto j = json::parse(gaze::read_text_file(path));
    return {j.at("train").get<std::vector<std::string>>(), j.at("val").get<std::vector<std::string>>(),
            j.at("test").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw IoError("malformed split file: " + std::string(e.what()));
  }
}

json metrics_json(const train::EvalReport& r) {
  json j;
  j["n"] = r.predictions.size();
  j["threshold"] = r.threshold;
  j["confusion"] = {{"tp", r.confusion.tp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}, {"fp", r.confusion.fp}};
  j["accuracy"] = r.metrics.accuracy;
  j["f1"] = r.metrics.f1;
  j["sensitivity"] = r.metrics.sensitivity;
  j["specificity"] = r.metrics.specificity;
  j["precision"] = r.metrics.precision;
  j["auc"] = r.roc.defined ? json(r.roc.auc) : json(nullptr);
  j["loss"] = r.loss;
  json flags = json::array();
  if (r.metrics.sensitivity_undefined) flags.push_back("sensitivity_undefined");
  if (r.metrics.specificity_undefined) flags.push_back("specificity_undefined");
  if (r.metrics.precision_undefined) flags.push_back("precision_undefined");
  if (r.metrics.f1_undefined) flags.push_back("f1_undefined");
  if (!r.roc.defined) flags.push_back("auc_undefined_single_class");
  j["flags"] = flags;
  return j;
}

// ---------------------------------------------------------------------------

int cmd_synth(const config::RunConfig& rc) {
  if (rc.size("cohort.subjects") == 0) throw ConfigError("--subjects must be at least 1");
  const auto cc = config::cohort_config(rc);
  const fs::path out = rc.str("out");
  const auto cohort = gaze::generate_cohort(cc, rc.u64("seed"));
  prepare_out_dir(out);
  gaze::write_cohort(cohort, out);
  write_resolved(rc, out);
  std::size_t asd = 0;
  for (const auto& s : cohort.subjects) asd += s.label == 1;
  std::printf("synth: %zu subjects (%zu positive, %zu negative), %zu scanpaths -> %s\n", cohort.subjects.size(), asd,
              cohort.subjects.size() - asd, cohort.path_count(), out.string().c_str());
  return kExitOk;
}

int cmd_features(const config::RunConfig& rc) {
  const auto fc = config::feature_config(rc);
  const auto data = load_examples(rc, fc);
  const fs::path out = rc.str("out");
  prepare_out_dir(out);
  std::vector<features::FeatureRow> rows;
  for (const auto& e : data.built.examples) rows.push_back({e.subject_id, e.stimulus_id, e.label, e.engineered});
  std::ostringstream csv;
  features::write_feature_csv(csv, fc.grid, rows);
  write_file(out / "features.csv", csv.str());
  json layout;
  layout["format"] = features::kFeatureLayoutVersion;
  layout["grid_rows"] = fc.grid.rows;
  layout["grid_cols"] = fc.grid.cols;
  layout["rqa_epsilon"] = fc.rqa_epsilon;
  layout["unvisited_rows"] = features::policy_name(fc.policy);
  layout["length"] = features::feature_length(fc.grid);
  layout["names"] = features::feature_names(fc.grid);
  layout["rows"] = rows.size();
  layout["skipped"] = data.built.skipped;
  write_file(out / "features_layout.json", layout.dump(2) + "\n");
  write_resolved(rc, out);
  std::printf("features: %zu rows, %zu skipped -> %s\n", rows.size(), data.built.skipped, out.string().c_str());
  return kExitOk;
}

int cmd_train(const config::RunConfig& rc) {
  const auto fc = config::feature_config(rc);
  const auto tc = config::train_config(rc);
  auto mc = config::model_config(rc);
  const auto data = load_examples(rc, fc);
  const auto split = data::split_subjects(data::subject_labels(data.built.examples), config::split_config(rc));
  const auto parts = data::apply_split(data.built.examples, split);
  const auto& first = data.built.examples.front();
  mc.engineered_dim = first.engineered.size();
  mc.speech_dim = first.speech.size();
  mc.visual_dim = first.visual.size();

  const fs::path out = rc.str("out");
  prepare_out_dir(out);
  write_resolved(rc, out);
  model::HybridModel m(mc, model::Normalization::fit(parts.train), rc.u64("seed"));
  note("train: " + std::to_string(parts.train.size()) + " train / " + std::to_string(parts.val.size()) + " val / " +
       std::to_string(parts.test.size()) + " test examples, " + std::to_string(m.parameters().scalar_count()) +
       " parameters");
  const auto result = train::fit(m, parts.train, parts.val, tc, [](const train::EpochRecord& e) {
    if (g_verbose) {
      std::fprintf(stderr, "epoch %4zu  train_loss %.5f  train_acc %.3f  val_loss %.5f  val_acc %.3f\n", e.epoch,
                   e.train_loss, e.train_acc, e.val_loss, e.val_acc);
    }
  });

  std::string history = "epoch,train_loss,val_loss,val_acc,train_acc\n";
  for (const auto& e : result.history) {
    history += std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," + fmt(e.val_loss) + "," + fmt(e.val_acc) + "," +
               fmt(e.train_acc) + "\n";
  }
  write_file(out / "history.csv", history);
  write_file(out / kSplitFile, split_json(split).dump(2) + "\n");
  auto ck = m.to_checkpoint();
  config::write_feature_header(ck.header, fc);
  ck.header["seed"] = rc.str("seed");
  ck.header["split_hash"] = std::to_string(split.hash());
  ck.header["best_epoch"] = std::to_string(result.best_epoch);
  ck.save((out / kCheckpoint).string());

  const auto train_eval = train::evaluate(m, parts.train);
  const auto val_eval = train::evaluate(m, parts.val);
  json summary;
  summary["epochs_run"] = result.history.size();
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_loss"] = result.best_val_loss;
  summary["stopped_early"] = result.stopped_early;
  summary["split_hash"] = split.hash();
  summary["train_accuracy"] = train_eval.metrics.accuracy;
  summary["val_accuracy"] = val_eval.metrics.accuracy;
  write_file(out / "train_summary.json", summary.dump(2) + "\n");
  std::printf("train: %zu epochs (best %zu), train acc %.4f, val acc %.4f -> %s\n", result.history.size(),
              result.best_epoch, train_eval.metrics.accuracy, val_eval.metrics.accuracy, out.string().c_str());
  return kExitOk;
}

int cmd_eval(const config::RunConfig& rc) {
  const auto& model_dir_s = rc.str("eval.model");
  if (model_dir_s.empty()) throw UsageError("no model given; pass --model <train output dir>");
  const fs::path model_dir = model_dir_s;
  if (!fs::exists(model_dir / kCheckpoint)) throw IoError("missing checkpoint '" + (model_dir / kCheckpoint).string() + "'");
  const auto ck = Checkpoint::load((model_dir / kCheckpoint).string());
  auto m = model::HybridModel::from_checkpoint(ck);
  const auto fc = config::feature_config_from_header(ck);
  const auto split = read_split(model_dir / kSplitFile);
  const auto data = load_examples(rc, fc);
  const auto parts = data::apply_split(data.built.examples, split);
  const auto& which = rc.str("eval.split");
  std::vector<data::Example> examples;
  if (which == "test") {
    examples = parts.test;
  } else if (which == "val") {
    examples = parts.val;
  } else if (which == "train") {
    examples = parts.train;
  } else if (which == "all") {
    examples = data.built.examples;
  } else {
    throw ConfigError("eval.split must be train, val, test or all");
  }
  if (examples.empty()) throw InsufficientDataError("the " + which + " split matches no example in this cohort");

  const double threshold = rc.real("eval.threshold");
  const auto report = train::evaluate(m, examples, threshold);
  const fs::path out = rc.str("out");
  prepare_out_dir(out);
  write_resolved(rc, out);

  json j;
  j["split"] = which;
  j["split_hash"] = split.hash();
  j["fusion"] = fusion::strategy_name(m.config().fusion);
  const auto metrics = metrics_json(report);
  for (auto& [k, v] : metrics.items()) j[k] = v;
  write_file(out / "report.json", j.dump(2) + "\n");

  std::string roc = "fpr,tpr,threshold\n";
  for (const auto& p : report.roc.points) roc += fmt(p.fpr) + "," + fmt(p.tpr) + "," + fmt(p.threshold) + "\n";
  write_file(out / "roc.csv", roc);

  std::string preds = "subject_id,stimulus_id,label,probability\n";
  for (const auto& p : report.predictions) {
    preds += p.subject_id + "," + p.stimulus_id + "," + std::to_string(p.label) + "," + fmt(p.prob) + "\n";
  }
  write_file(out / "predictions.csv", preds);

  const auto all_names = features::feature_names(fc.grid);
  json kept_names = json::array();
  for (auto i : model::kept_features(m.config().engineered_dim, m.config().temporal_features)) {
    kept_names.push_back(all_names[i]);
  }
  json ex_list = json::array();
  for (const auto& ex : examples) {
    const auto e = train::explain(m, ex);
    json item;
    item["subject_id"] = e.prediction.subject_id;
    item["stimulus_id"] = e.prediction.stimulus_id;
    item["label"] = e.prediction.label;
    item["probability"] = e.prediction.prob;
    if (e.alpha.empty()) {
      item["alpha"] = nullptr;
    } else {
      json a;
      for (std::size_t k = 0; k < e.alpha.size(); ++k) a[std::string(model::kModalityNames[k])] = e.alpha[k];
      item["alpha"] = a;
    }
    item["saliency"] = {{"engineered", e.saliency_engineered},
                        {"speech", e.saliency_speech},
                        {"visual", e.saliency_visual}};
    ex_list.push_back(item);
  }
  json expl;
  expl["fusion"] = fusion::strategy_name(m.config().fusion);
  expl["modalities"] = model::kModalityNames;
  expl["engineered_features"] = kept_names;
  expl["examples"] = ex_list;
  write_file(out / "explanations.json", expl.dump(2) + "\n");

  std::printf("eval (%s, n=%zu): accuracy %.4f  f1 %.4f  sensitivity %.4f  specificity %.4f  auc %s -> %s\n",
              which.c_str(), examples.size(), report.metrics.accuracy, report.metrics.f1, report.metrics.sensitivity,
              report.metrics.specificity, report.roc.defined ? fmt(report.roc.auc).c_str() : "undefined",
              out.string().c_str());
  return kExitOk;
}

std::string ablation_text(const std::vector<train::ArmResult>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %-6s %8s %8s %8s %8s %8s %6s\n", "arm", "status", "accuracy", "f1",
                "sens", "spec", "auc", "epochs");
  out += line;
  for (const auto& r : rows) {
    if (!r.ok) {
      std::snprintf(line, sizeof line, "%-20s %-6s %s\n", r.arm.id.c_str(), "failed", r.error.c_str());
    } else {
      const auto& m = r.test.metrics;
      char auc[16] = "n/a";
      if (r.test.roc.defined) std::snprintf(auc, sizeof auc, "%.4f", r.test.roc.auc);
      std::snprintf(line, sizeof line, "%-20s %-6s %8.4f %8.4f %8.4f %8.4f %8s %6zu\n", r.arm.id.c_str(), "ok",
                    m.accuracy, m.f1, m.sensitivity, m.specificity, auc, r.epochs_run);
    }
    out += line;
  }
  return out;
}

int cmd_ablate(const config::RunConfig& rc) {
  const auto arms = train::select_arms(rc.str("ablate.arms"));
  if (arms.empty()) throw ConfigError("no ablation arms selected");
  const auto fc = config::feature_config(rc);
  const auto tc = config::train_config(rc);
  auto mc = config::model_config(rc);
  const auto data = load_examples(rc, fc);
  const auto split = data::split_subjects(data::subject_labels(data.built.examples), config::split_config(rc));
  const auto parts = data::apply_split(data.built.examples, split);
  const auto& first = data.built.examples.front();
  mc.engineered_dim = first.engineered.size();
  mc.speech_dim = first.speech.size();
  mc.visual_dim = first.visual.size();
  const fs::path out = rc.str("out");
  prepare_out_dir(out);
  write_resolved(rc, out);

  const auto rows = train::ablate(mc, tc, rc.u64("seed"), parts, split.hash(), arms, [](const train::ArmResult& r) {
    note("arm " + r.arm.id + (r.ok ? ": done" : ": failed: " + r.error));
  });

  std::string csv =
      "arm,fusion,temporal_features,status,split_hash,epochs_run,best_epoch,tp,fn,tn,fp,accuracy,f1,sensitivity,"
      "specificity,precision,auc,loss,error\n";
  std::size_t failed = 0;
  for (const auto& r : rows) {
    csv += r.arm.id + "," + fusion::strategy_name(r.arm.strategy) + "," + (r.arm.temporal ? "true" : "false") + ",";
    csv += std::string(r.ok ? "ok" : "failed") + "," + std::to_string(r.split_hash) + ",";
    if (r.ok) {
      const auto& c = r.test.confusion;
      const auto& m = r.test.metrics;
      csv += std::to_string(r.epochs_run) + "," + std::to_string(r.best_epoch) + "," + std::to_string(c.tp) + "," +
             std::to_string(c.fn) + "," + std::to_string(c.tn) + "," + std::to_string(c.fp) + "," + fmt(m.accuracy) +
             "," + fmt(m.f1) + "," + fmt(m.sensitivity) + "," + fmt(m.specificity) + "," + fmt(m.precision) + "," +
             (r.test.roc.defined ? fmt(r.test.roc.auc) : "") + "," + fmt(r.test.loss) + ",\n";
    } else {
      ++failed;
      std::string err = r.error;
      for (auto& ch : err) {
        if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
      }
      csv += ",,,,,,,,,,,,," + err + "\n";
    }
  }
  write_file(out / "ablation.csv", csv);
  const auto text = ablation_text(rows);
  write_file(out / "ablation.txt", text);
  std::fputs(text.c_str(), stdout);
  if (failed == rows.size()) {
    std::cerr << "error: every ablation arm failed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gazefuse: gaze-based classification with spatial attention, state-space temporal encoding and "
               "multimodal fusion"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> assignments;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "Top-level seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--set", assignments, "Override any config key (key=value); repeatable");
  app.add_flag("-v,--verbose", g_verbose, "Progress output on stderr");

  std::size_t subjects = 0;
  double class_gap = 0;
  std::string cohort_dir, optimizer, fusion_name, model_dir, eval_split, arms;
  std::size_t epochs = 0;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth->add_option("--subjects", subjects, "Number of subjects (split evenly across classes)");
  synth->add_option("--class-gap", class_gap, "Separation between classes; 0 gives a no-signal cohort");

  auto* feats = app.add_subcommand("features", "Extract engineered features to CSV");
  auto* trn = app.add_subcommand("train", "Train a model on a cohort");
  auto* evl = app.add_subcommand("eval", "Evaluate a trained model and export explanations");
  auto* abl = app.add_subcommand("ablate", "Run the fusion / feature-set ablation sweep");
  for (auto* sc : {feats, trn, evl, abl}) sc->add_option("--cohort", cohort_dir, "Cohort directory (manifest.json)");
  for (auto* sc : {trn, abl}) {
    sc->add_option("--optimizer", optimizer, "adam or sgd");
    sc->add_option("--epochs", epochs, "Maximum training epochs");
  }
  trn->add_option("--fusion", fusion_name, "hybrid, early or late");
  evl->add_option("--model", model_dir, "Directory written by `train`");
  evl->add_option("--split", eval_split, "train, val, test or all");
  abl->add_option("--arms", arms, "Comma-separated arm ids (default: all six)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    config::RunConfig rc;
    if (!config_path.empty()) rc.merge_file(config_path);
    for (const auto& a : assignments) rc.merge_assignment(a);
    auto given = [&](const CLI::App* sc, const char* flag) { return sc->count(flag) > 0; };
    if (app.count("--seed")) rc.set("seed", std::to_string(seed));
    if (app.count("--out")) rc.set("out", out_dir);
    if (given(synth, "--subjects")) rc.set("cohort.subjects", std::to_string(subjects));
    if (given(synth, "--class-gap")) rc.set("cohort.class_gap", fmt(class_gap));
    for (auto* sc : {feats, trn, evl, abl}) {
      if (given(sc, "--cohort")) rc.set("cohort.dir", cohort_dir);
    }
    for (auto* sc : {trn, abl}) {
      if (given(sc, "--optimizer")) rc.set("train.optimizer", optimizer);
      if (given(sc, "--epochs")) rc.set("train.epochs", std::to_string(epochs));
    }
    if (given(trn, "--fusion")) rc.set("model.fusion", fusion_name);
    if (given(evl, "--model")) rc.set("eval.model", model_dir);
    if (given(evl, "--split")) rc.set("eval.split", eval_split);
    if (given(abl, "--arms")) rc.set("ablate.arms", arms);

    if (*synth) return cmd_synth(rc);
    if (*feats) return cmd_features(rc);
    if (*trn) return cmd_train(rc);
    if (*evl) return cmd_eval(rc);
    if (*abl) return cmd_ablate(rc);
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
