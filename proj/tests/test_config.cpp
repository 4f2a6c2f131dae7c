#include <gtest/gtest.h>

#include <fstream>

#include "gazefuse/config.hpp"

namespace gazefuse {
namespace {

using config::RunConfig;

TEST(RunConfig, DefaultsResolveToLibraryStructs) {
  RunConfig rc;
  const auto cc = config::cohort_config(rc);
  EXPECT_EQ(cc.n_asd + cc.n_td, 64u);
  EXPECT_EQ(config::split_config(rc).train, 0.7);
  const auto tc = config::train_config(rc);
  EXPECT_EQ(tc.optimizer.kind, OptimizerKind::adam);
  EXPECT_EQ(tc.optimizer.learning_rate, 1e-3);
  EXPECT_EQ(tc.optimizer.weight_decay, 1e-4);
  EXPECT_EQ(tc.epochs, 200u);
  EXPECT_EQ(tc.batch_size, 16u);
  EXPECT_EQ(tc.patience, 20u);
  const auto mc = config::model_config(rc);
  EXPECT_EQ(mc.dropout, 0.1);
  EXPECT_EQ(mc.fusion, fusion::Strategy::hybrid);
}

TEST(RunConfig, FileThenAssignmentsOverride) {
  RunConfig rc;
  rc.merge_text("# comment\n\n  train.epochs = 5 \nmodel.fusion=late\r\n");
  EXPECT_EQ(rc.size("train.epochs"), 5u);
  EXPECT_EQ(rc.str("model.fusion"), "late");
  rc.merge_assignment("train.epochs=9");
  EXPECT_EQ(rc.size("train.epochs"), 9u);
}

TEST(RunConfig, ResolvedTextRoundTrips) {
  RunConfig rc;
  rc.set("seed", "99");
  rc.set("train.optimizer", "sgd");
  RunConfig back;
  back.merge_text(rc.to_text());
  EXPECT_EQ(back.to_text(), rc.to_text());
  EXPECT_NE(rc.to_text().find("train.optimizer = sgd\n"), std::string::npos);
}

TEST(RunConfig, ShippedDefaultFileMatchesBuiltInDefaults) {
  RunConfig shipped;
  shipped.merge_file(GAZEFUSE_SOURCE_DIR "/configs/default.conf");
  EXPECT_EQ(shipped.to_text(), RunConfig{}.to_text());
}

TEST(RunConfig, BadInputIsConfigError) {
  RunConfig rc;
  EXPECT_THROW(rc.set("no.such.key", "1"), ConfigError);
  EXPECT_THROW(rc.merge_text("train.epochs 5\n"), ConfigError);
  EXPECT_THROW(rc.merge_assignment("seed"), ConfigError);
  rc.set("train.epochs", "ten");
  EXPECT_THROW(config::train_config(rc), ConfigError);
  rc.set("train.epochs", "0");
  EXPECT_THROW(config::train_config(rc), ConfigError);
  rc = {};
  rc.set("split.stratified", "maybe");
  EXPECT_THROW(config::split_config(rc), ConfigError);
  rc = {};
  rc.set("cohort.subjects", "0");
  EXPECT_THROW(config::cohort_config(rc), ConfigError);
  rc = {};
  rc.set("model.fusion", "stacked");
  EXPECT_THROW(config::model_config(rc), ConfigError);
  EXPECT_THROW(rc.merge_file("/nonexistent/gazefuse.conf"), IoError);
}

TEST(RunConfig, OddSubjectCountsFavourThePositiveClass) {
  RunConfig rc;
  rc.set("cohort.subjects", "5");
  const auto cc = config::cohort_config(rc);
  EXPECT_EQ(cc.n_asd, 3u);
  EXPECT_EQ(cc.n_td, 2u);
}

TEST(RunConfig, FeatureSettingsTravelWithCheckpoint) {
  RunConfig rc;
  rc.set("features.grid_rows", "3");
  rc.set("features.unvisited_rows", "zero");
  const auto fc = config::feature_config(rc);
  Checkpoint ck;
  config::write_feature_header(ck.header, fc);
  const auto back = config::feature_config_from_header(ck);
  EXPECT_EQ(back.grid.rows, 3u);
  EXPECT_EQ(back.grid.cols, 4u);
  EXPECT_EQ(back.policy, features::UnvisitedRowPolicy::zero);
  EXPECT_EQ(back.rqa_epsilon, fc.rqa_epsilon);
}

}  // namespace
}  // namespace gazefuse
