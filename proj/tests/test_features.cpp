#include <gtest/gtest.h>

#include <cmath>

#include "gazefuse/features.hpp"
#include "gazefuse/gaze/cohort.hpp"
#include "gazefuse/rng.hpp"

namespace gazefuse::features {
namespace {

using gaze::Fixation;

ScanPath path_of(std::vector<Fixation> f) {
  ScanPath p;
  p.subject_id = "S";
  p.stimulus_id = "x";
  p.fixations = std::move(f);
  return p;
}

ScanPath random_path(Rng& rng, std::size_t n) {
  std::vector<Fixation> f;
  double t = 0;
  for (std::size_t k = 0; k < n; ++k) {
    f.push_back({rng.uniform(), rng.uniform(), rng.uniform(80, 400), t});
    t += f.back().duration_ms + rng.uniform(5, 60);
  }
  return path_of(f);
}

TEST(RegionGrid, EdgesMapToLastTile) {
  RegionGrid g{4, 4};
  EXPECT_EQ(g.region_of(0, 0), 0u);
  EXPECT_EQ(g.region_of(1, 1), 15u);
  EXPECT_EQ(g.region_of(1, 0), 3u);
  EXPECT_EQ(g.region_of(0.25, 0.0), 1u);
}

TEST(TransitionMatrix, AlternatingSequence) {
  const std::vector<std::size_t> seq{0, 1, 0, 1};
  auto tm = transition_matrix(seq, 2);
  EXPECT_EQ(tm.counts, (std::vector<std::size_t>{0, 2, 1, 0}));
  EXPECT_EQ(tm.probs, (std::vector<double>{0, 1, 1, 0}));
}

TEST(TransitionMatrix, SingleRegion) {
  const std::vector<std::size_t> seq{0, 0, 0};
  EXPECT_EQ(transition_matrix(seq, 1).probs, (std::vector<double>{1.0}));
}

TEST(TransitionMatrix, UnvisitedRowPolicies) {
  const std::vector<std::size_t> seq{0, 1, 3, 0};
  auto u = transition_matrix(seq, 4, UnvisitedRowPolicy::uniform);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(u.prob(2, j), 0.25);
  EXPECT_FALSE(u.visited[2]);
  auto z = transition_matrix(seq, 4, UnvisitedRowPolicy::zero);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(z.prob(2, j), 0.0);
}

TEST(TransitionMatrix, TooFewFixations) {
  EXPECT_THROW(transition_matrix(path_of({{0.1, 0.1, 100, 0}}), RegionGrid{}), InsufficientDataError);
}

TEST(TransitionMatrix, PropertyRowStochastic) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    RegionGrid g{1 + rng.below(5), 1 + rng.below(5)};
    auto p = random_path(rng, 2 + rng.below(30));
    for (auto pol : {UnvisitedRowPolicy::uniform, UnvisitedRowPolicy::zero}) {
      auto tm = transition_matrix(p, g, pol);
      for (std::size_t i = 0; i < g.regions(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < g.regions(); ++j) s += tm.prob(i, j);
        if (pol == UnvisitedRowPolicy::uniform || tm.visited[i]) EXPECT_NEAR(s, 1.0, 1e-9);
        else EXPECT_EQ(s, 0.0);
      }
    }
  }
}

TEST(SpatialStats, Examples) {
  auto s = spatial_stats(path_of({{0, 0, 100, 0}, {0.3, 0.4, 200, 150}}));
  EXPECT_DOUBLE_EQ(s.mean_saccade_amplitude, 0.5);
  EXPECT_DOUBLE_EQ(s.max_saccade_amplitude, 0.5);

  auto same = spatial_stats(path_of({{0.5, 0.5, 100, 0}, {0.5, 0.5, 100, 150}, {0.5, 0.5, 100, 300}}));
  EXPECT_EQ(same.dispersion, 0.0);
  EXPECT_EQ(same.max_saccade_amplitude, 0.0);

  auto d = spatial_stats(path_of({{0, 0, 100, 0}, {0, 0, 200, 150}, {0, 0, 300, 400}}));
  EXPECT_DOUBLE_EQ(d.mean_fixation_ms, 200.0);
  EXPECT_NEAR(d.std_fixation_ms, 81.65, 0.005);
  EXPECT_THROW(spatial_stats(path_of({{0, 0, 100, 0}})), InsufficientDataError);
}

TEST(DwellTimes, Examples) {
  RegionGrid g{2, 2};
  auto one = dwell_times(path_of({{0.1, 0.1, 100, 0}}), g);
  EXPECT_EQ(one, (std::vector<double>{1, 0, 0, 0}));
  auto two = dwell_times(path_of({{0.1, 0.1, 100, 0}, {0.9, 0.1, 100, 200}}), g);
  EXPECT_EQ(two, (std::vector<double>{0.5, 0.5, 0, 0}));
  auto same = dwell_times(path_of({{0.1, 0.1, 100, 0}, {0.2, 0.2, 300, 200}}), g);
  EXPECT_EQ(same[0], 1.0);
  EXPECT_THROW(dwell_times(path_of({}), g), InsufficientDataError);
}

TEST(DwellTimes, PropertySumsToOne) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto d = dwell_times(random_path(rng, 1 + rng.below(40)), RegionGrid{4, 4});
    double s = 0;
    for (double v : d) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Entropy, Examples) {
  EXPECT_DOUBLE_EQ(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 2.0);
  EXPECT_EQ(entropy(std::vector<double>{0, 1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(entropy(std::vector<double>{0.5, 0.25, 0.25}), 1.5);
  EXPECT_THROW(entropy(std::vector<double>{0.5, -0.1, 0.6}), InvalidDistributionError);
  EXPECT_THROW(entropy(std::vector<double>{0.5, 0.4}), InvalidDistributionError);
  EXPECT_NO_THROW(entropy(std::vector<double>{0.5, 0.5 + 5e-7}));
}

TEST(Entropy, PropertyBoundedByLogN) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + rng.below(20);
    std::vector<double> p(n);
    double s = 0;
    for (auto& v : p) s += (v = rng.uniform());
    for (auto& v : p) v /= s;
    const double h = entropy(p);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(static_cast<double>(n)) + 1e-12);
    std::vector<double> uni(n, 1.0 / n);
    EXPECT_NEAR(entropy(uni), std::log2(static_cast<double>(n)), 1e-12);
  }
}

TEST(Recurrence, Examples) {
  EXPECT_EQ(rqa_recurrence(path_of({{0.5, 0.5, 100, 0}, {0.5, 0.5, 100, 200}, {0.5, 0.5, 100, 400}}), 0.05), 1.0);
  EXPECT_EQ(rqa_recurrence(path_of({{0.1, 0.1, 100, 0}, {0.9, 0.9, 100, 200}}), 0.05), 0.0);
  // pairs: (0,1) close, (0,2) far, (1,2) far
  EXPECT_DOUBLE_EQ(rqa_recurrence(path_of({{0.1, 0.1, 100, 0}, {0.12, 0.1, 100, 200}, {0.8, 0.8, 100, 400}}), 0.05),
                   1.0 / 3.0);
}

TEST(Recurrence, PropertyTranslationInvariant) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_path(rng, 2 + rng.below(25));
    for (auto& f : p.fixations) f.x *= 0.5, f.y *= 0.5;
    auto q = p;
    const double dx = rng.uniform(0, 0.5), dy = rng.uniform(0, 0.5);
    for (auto& f : q.fixations) f.x += dx, f.y += dy;
    // translation can move distances by an ulp; only compare off the threshold
    EXPECT_NEAR(rqa_recurrence(p, 0.1), rqa_recurrence(q, 0.1), 1.0 / 300.0 + 1e-12);
  }
}

TEST(SaccadicSpeed, Examples) {
  auto one = saccadic_speed(path_of({{0, 0, 100, 0}, {0.3, 0.4, 100, 200}}));
  EXPECT_DOUBLE_EQ(one.mean, 5.0);
  auto still = saccadic_speed(path_of({{0.5, 0.5, 100, 0}, {0.5, 0.5, 100, 150}}));
  EXPECT_EQ(still.mean, 0.0);
  // speeds 2 (0.2 in 100 ms) and 4 (0.4 in 100 ms)
  auto two = saccadic_speed(path_of({{0, 0, 100, 0}, {0.2, 0, 100, 200}, {0.6, 0, 100, 400}}));
  EXPECT_DOUBLE_EQ(two.mean, 3.0);
  EXPECT_DOUBLE_EQ(two.max, 4.0);
  EXPECT_THROW(saccadic_speed(path_of({{0, 0, 100, 0}, {0.2, 0, 100, 100}})), InsufficientDataError);
}

TEST(AssembleFeatures, LayoutLength) {
  FeatureConfig cfg;
  EXPECT_EQ(feature_length(cfg.grid), 9u + 16u + 256u);
  EXPECT_EQ(feature_names(cfg.grid).size(), feature_length(cfg.grid));
  Rng rng(5);
  auto p = random_path(rng, 12);
  auto v = assemble_features(p, cfg);
  EXPECT_EQ(v.size(), feature_length(cfg.grid));
  EXPECT_EQ(v, assemble_features(p, cfg));
  EXPECT_EQ(feature_names(cfg.grid)[kTemporalFeatureIndices[0]], "mean_saccadic_speed");
  EXPECT_EQ(feature_names(cfg.grid)[kTemporalFeatureIndices[1]], "fixation_entropy");
}

TEST(AssembleFeatures, FiniteOverSyntheticCohort) {
  gaze::CohortConfig cc;
  cc.n_asd = cc.n_td = 125;
  cc.stimuli = 4;
  auto cohort = gaze::generate_cohort(cc, 21);
  std::size_t n = 0;
  for (const auto& s : cohort.subjects) {
    for (const auto& p : s.paths) {
      auto v = assemble_features(p, FeatureConfig{});
      for (double x : v) ASSERT_TRUE(std::isfinite(x));
      ++n;
    }
  }
  EXPECT_EQ(n, 1000u);
}

}  // namespace
}  // namespace gazefuse::features
