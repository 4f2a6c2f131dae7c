// Runs the built executable as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "gazefuse_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(GAZEFUSE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string d(const std::string& name) { return (work_dir() / name).string(); }

// Small cohort and model so the whole file runs in a few seconds.
const char* kFast =
    " --set model.d_model=8 --set model.heads=2 --set model.layers=1 --set model.d_f=8 --set model.d_a=4"
    " --set model.ssm_blocks=1 --set model.d_state=4";

const fs::path& small_cohort() {
  static const fs::path dir = [] {
    EXPECT_EQ(run("synth --subjects 20 --seed 3 --out " + d("small")), 0);
    return work_dir() / "small";
  }();
  return dir;
}

TEST(Cli, SynthIsDeterministicAndCountsSubjects) {
  ASSERT_EQ(run("synth --subjects 50 --seed 7 --out " + d("s")), 0);
  fs::rename(work_dir() / "s", work_dir() / "s1");
  ASSERT_EQ(run("synth --subjects 50 --seed 7 --out " + d("s")), 0);
  fs::rename(work_dir() / "s", work_dir() / "s2");
  for (const auto& entry : fs::recursive_directory_iterator(work_dir() / "s1")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), work_dir() / "s1");
    EXPECT_EQ(slurp(entry.path()), slurp(work_dir() / "s2" / rel)) << rel;
  }
  const auto manifest = nlohmann::json::parse(slurp(work_dir() / "s1" / "manifest.json"));
  EXPECT_EQ(manifest.at("n_subjects").get<int>(), 50);
  EXPECT_EQ(manifest.at("subjects").size(), 50u);
  EXPECT_TRUE(fs::exists(work_dir() / "s1" / "resolved.conf"));
}

TEST(Cli, ZeroSubjectsExitsTwoWithoutFiles) {
  EXPECT_EQ(run("synth --subjects 0 --out " + d("empty")), 2);
  EXPECT_FALSE(fs::exists(work_dir() / "empty"));
}

TEST(Cli, UnwritableOutputExitsTwo) {
  EXPECT_EQ(run("synth --subjects 4 --out /proc/gazefuse_forbidden"), 2);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("bogus"), 2);
  EXPECT_EQ(run("synth --set no.such.key=1 --out " + d("x")), 2);
  EXPECT_EQ(run("features --cohort " + d("missing") + " --out " + d("x")), 2);
  EXPECT_EQ(run("eval --cohort " + small_cohort().string() + " --model " + d("missing") + " --out " + d("x")), 2);
}

TEST(Cli, FeaturesOneRowPerScanpathAndStableBytes) {
  const auto cohort = small_cohort().string();
  ASSERT_EQ(run("features --cohort " + cohort + " --out " + d("f1")), 0);
  ASSERT_EQ(run("features --cohort " + cohort + " --out " + d("f2")), 0);
  const auto csv = slurp(work_dir() / "f1" / "features.csv");
  EXPECT_EQ(csv, slurp(work_dir() / "f2" / "features.csv"));
  const auto rows = std::count(csv.begin(), csv.end(), '\n') - 1;
  EXPECT_EQ(rows, 20 * 4);
  const auto layout = nlohmann::json::parse(slurp(work_dir() / "f1" / "features_layout.json"));
  EXPECT_EQ(layout.at("names").size(), layout.at("length").get<std::size_t>());
}

TEST(Cli, FeaturesSkipsDegeneratePathWithWarning) {
  const auto src = small_cohort();
  const auto dst = work_dir() / "degenerate";
  fs::remove_all(dst);
  fs::copy(src, dst, fs::copy_options::recursive);
  // Truncate one subject's first scanpath to a single fixation.
  const auto manifest = nlohmann::json::parse(slurp(dst / "manifest.json"));
  const auto scan = dst / manifest.at("subjects").at(0).at("scanpaths").get<std::string>();
  std::istringstream in(slurp(scan));
  std::string out, line, first_stim;
  bool kept_one = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("subject_id,", 0) == 0) {
      out += line + "\n";
      continue;
    }
    const auto stim = line.substr(line.find(',') + 1, line.find(',', line.find(',') + 1) - line.find(',') - 1);
    if (first_stim.empty()) first_stim = stim;
    if (stim == first_stim) {
      if (kept_one) continue;
      kept_one = true;
    }
    out += line + "\n";
  }
  std::ofstream(scan, std::ios::binary | std::ios::trunc) << out;
  ASSERT_EQ(run("features --cohort " + dst.string() + " --out " + d("fdeg")), 0);
  const auto csv = slurp(work_dir() / "fdeg" / "features.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n') - 1, 20 * 4 - 1);
  const auto layout = nlohmann::json::parse(slurp(work_dir() / "fdeg" / "features_layout.json"));
  EXPECT_EQ(layout.at("skipped").get<int>(), 1);
}

TEST(Cli, TrainEvalPipelineIsReproducible) {
  const auto cohort = small_cohort().string();
  const std::string train = "train --cohort " + cohort + " --epochs 3 --optimizer sgd" + kFast;
  // Same command twice into the same directory, so even resolved.conf must match.
  ASSERT_EQ(run(train + " --out " + d("m")), 0);
  fs::rename(work_dir() / "m", work_dir() / "m1");
  ASSERT_EQ(run(train + " --out " + d("m")), 0);
  fs::rename(work_dir() / "m", work_dir() / "m2");
  for (const char* f : {"checkpoint.bin", "history.csv", "split.json", "resolved.conf"}) {
    EXPECT_EQ(slurp(work_dir() / "m1" / f), slurp(work_dir() / "m2" / f)) << f;
  }
  EXPECT_NE(slurp(work_dir() / "m1" / "resolved.conf").find("train.optimizer = sgd"), std::string::npos);
  const auto history = slurp(work_dir() / "m1" / "history.csv");
  EXPECT_EQ(history.rfind("epoch,train_loss,val_loss,val_acc", 0), 0u);

  ASSERT_EQ(run("eval --cohort " + cohort + " --model " + d("m1") + " --out " + d("e")), 0);
  fs::rename(work_dir() / "e", work_dir() / "e1");
  ASSERT_EQ(run("eval --cohort " + cohort + " --model " + d("m1") + " --out " + d("e")), 0);
  fs::rename(work_dir() / "e", work_dir() / "e2");
  for (const char* f : {"report.json", "roc.csv", "explanations.json", "predictions.csv", "resolved.conf"}) {
    EXPECT_EQ(slurp(work_dir() / "e1" / f), slurp(work_dir() / "e2" / f)) << f;
  }
  const auto report = nlohmann::json::parse(slurp(work_dir() / "e1" / "report.json"));
  for (const char* k : {"accuracy", "f1", "sensitivity", "specificity", "auc"}) EXPECT_TRUE(report.contains(k)) << k;
  const auto expl = nlohmann::json::parse(slurp(work_dir() / "e1" / "explanations.json"));
  ASSERT_FALSE(expl.at("examples").empty());
  for (const auto& e : expl.at("examples")) {
    double s = 0;
    for (const auto& [_, a] : e.at("alpha").items()) s += a.get<double>();
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  EXPECT_TRUE(fs::exists(work_dir() / "e1" / "resolved.conf"));
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const auto conf = work_dir() / "run.conf";
  std::ofstream(conf) << "train.epochs = 7\nseed = 11\n";
  const auto cohort = small_cohort().string();
  ASSERT_EQ(run("train --config " + conf.string() + " --cohort " + cohort + " --epochs 1" + kFast + " --out " + d("pc")), 0);
  const auto resolved = slurp(work_dir() / "pc" / "resolved.conf");
  EXPECT_NE(resolved.find("train.epochs = 1\n"), std::string::npos);
  EXPECT_NE(resolved.find("seed = 11\n"), std::string::npos);
}

TEST(Cli, AblateFilterAndReproducibility) {
  const auto cohort = small_cohort().string();
  const std::string cmd = "ablate --cohort " + cohort + " --epochs 2" + kFast;
  ASSERT_EQ(run(cmd + " --arms hybrid,early --out " + d("a2")), 0);
  const auto two = slurp(work_dir() / "a2" / "ablation.csv");
  EXPECT_EQ(std::count(two.begin(), two.end(), '\n'), 3);
  ASSERT_EQ(run(cmd + " --out " + d("a6")), 0);
  ASSERT_EQ(run(cmd + " --out " + d("a6b")), 0);
  const auto six = slurp(work_dir() / "a6" / "ablation.csv");
  EXPECT_EQ(std::count(six.begin(), six.end(), '\n'), 7);
  EXPECT_EQ(six, slurp(work_dir() / "a6b" / "ablation.csv"));
  EXPECT_EQ(slurp(work_dir() / "a6" / "ablation.txt"), slurp(work_dir() / "a6b" / "ablation.txt"));
  EXPECT_EQ(run(cmd + " --arms nope --out " + d("ax")), 2);
}

TEST(Cli, NonFiniteTrainingExitsThree) {
  const auto cohort = small_cohort().string();
  EXPECT_EQ(run("train --cohort " + cohort + " --epochs 5 --set train.learning_rate=1e300 --set train.weight_decay=0" +
                kFast + " --out " + d("nan")),
            3);
}

}  // namespace
