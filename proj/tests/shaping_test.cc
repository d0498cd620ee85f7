// Copyright 2026 The seqreward Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "seqreward/shaping.h"

#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "seqreward/errors.h"
#include "seqreward/hash.h"
#include "test_util.h"

namespace seqreward {
namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(GatedRewardsTest, AllOnes) {
  const LevelScores r = GatedRewards({1.0, 1.0, 1.0}, 10.0, -0.5);
  EXPECT_DOUBLE_EQ(r[0], 1.0);
  EXPECT_NEAR(r[1], 0.99331, 1e-5);
  EXPECT_NEAR(r[2], 0.99285, 1e-5);
}

TEST(GatedRewardsTest, WrongDomainSuppressesLowerLevels) {
  const LevelScores r = GatedRewards({0.0, 1.0, 1.0}, 10.0, -0.5);
  EXPECT_DOUBLE_EQ(r[0], 0.0);
  EXPECT_NEAR(r[1], 0.00669, 1e-5);
  EXPECT_NEAR(r[2], 0.00716, 1e-5);
  EXPECT_NEAR(r[2], Sigmoid(10.0 * (Sigmoid(-5.0) - 0.5)), 1e-15);
}

TEST(GatedRewardsTest, CenteredGateIsHalf) {
  for (double tau : {0.1, 1.0, 10.0, 100.0}) {
    const LevelScores r = GatedRewards({0.5, 1.0, 0.3}, tau, -0.5);
    EXPECT_EQ(r[1], 0.5);
  }
}

TEST(GatedRewardsTest, MonotoneInDomainScore) {
  for (double ya : {0.1, 0.5, 0.9}) {
    for (double ys : {0.2, 0.8}) {
      LevelScores prev = GatedRewards({0.0, ya, ys}, 10.0, -0.5);
      for (int i = 1; i <= 50; ++i) {
        const LevelScores r = GatedRewards({i / 50.0, ya, ys}, 10.0, -0.5);
        EXPECT_GT(r[1], prev[1]);
        EXPECT_GT(r[2], prev[2]);
        prev = r;
      }
    }
  }
}

TEST(GatedRewardsTest, LevelDominance) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const LevelScores y = {Uniform01(rng), Uniform01(rng), Uniform01(rng)};
    const double tau = 0.5 + 20.0 * Uniform01(rng);
    const double b = -Uniform01(rng);
    const LevelScores r = GatedRewards(y, tau, b);
    EXPECT_EQ(r[0], y[0]);
    EXPECT_LE(r[1], y[1]);
    EXPECT_LE(r[2], y[2]);
  }
}

TEST(GatedRewardsTest, LargerTauGivesSteeperGate) {
  const double h = 1e-6;
  // Only near the gate center: far from it a steeper sigmoid is flatter.
  for (double rd : {0.25, 0.35, 0.45, 0.55, 0.65, 0.75}) {
    auto slope = [&](double tau) {
      const double up = GatedRewards({rd + h, 1.0, 1.0}, tau, -0.5)[1];
      const double down = GatedRewards({rd - h, 1.0, 1.0}, tau, -0.5)[1];
      return std::abs(up - down) / (2 * h);
    };
    EXPECT_GT(slope(10.0), slope(2.0)) << rd;
  }
}

TEST(CombineTest, Cases) {
  EXPECT_DOUBLE_EQ(Combine(Combination::kSeqAvg, {1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(Combine(Combination::kSeqPrd, {1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(Combine(Combination::kSeqAvg, {1, 0, 0}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(Combine(Combination::kSeqPrd, {1, 0, 0}), 0.0);
}

TEST(CombineTest, AverageDominatesProductWhenSlotIsSmallest) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const LevelScores r = GatedRewards(
        {Uniform01(rng), Uniform01(rng), Uniform01(rng)}, 10.0, -0.5);
    if (r[0] >= r[2] && r[1] >= r[2]) {
      EXPECT_GE(Combine(Combination::kSeqAvg, r),
                Combine(Combination::kSeqPrd, r));
    }
  }
}

TEST(CombinationTest, ParseNames) {
  EXPECT_EQ(ParseCombination("SeqPrd"), Combination::kSeqPrd);
  EXPECT_EQ(ParseCombination("seqavg"), Combination::kSeqAvg);
  EXPECT_EQ(ParseCombination(CombinationName(Combination::kSeqAvg)),
            Combination::kSeqAvg);
  EXPECT_THROW(ParseCombination("sum"), ConfigError);
}

TEST(ShapingParamsTest, JsonRoundTripAndValidation) {
  ShapingParams p;
  p.tau = 3.0;
  p.b = -0.25;
  p.alpha = 0.0;
  p.combination = Combination::kSeqAvg;
  const ShapingParams q = ShapingParams::FromJson(p.ToJson());
  EXPECT_EQ(q.tau, 3.0);
  EXPECT_EQ(q.b, -0.25);
  EXPECT_EQ(q.alpha, 0.0);
  EXPECT_EQ(q.combination, Combination::kSeqAvg);
  EXPECT_EQ(ShapingParams::FromJson({{"alpha", 2.0}}, p).tau, 3.0);
  EXPECT_THROW(ShapingParams::FromJson({{"tau", 0.0}}), ConfigError);
  EXPECT_THROW(ShapingParams::FromJson({{"alpha", -1.0}}), ConfigError);
}

class EstimatorTest : public ::testing::Test {
 protected:
  EstimatorTest()
      : ontology_(testing::DefaultOntology()),
        dae_(MakeDae(ontology_)),
        disc_(MakeDisc(dae_)) {}

  static DaeModel MakeDae(const Ontology& o) {
    Rng rng(1);
    return DaeModel(o, DaeConfig{}, rng);
  }
  static DiscriminatorSet MakeDisc(const DaeModel& dae) {
    Rng rng(2);
    return DiscriminatorSet(dae.latent_dim(), dae.level_sizes(), 64, rng);
  }

  RewardEstimator Make(ShapingParams p = {}) const {
    return RewardEstimator(ontology_, dae_, disc_, p);
  }

  DialogState RandomState(Rng& rng) const {
    std::vector<std::uint8_t> bits(ontology_.state_dim());
    for (auto& b : bits) b = Uniform01(rng) < 0.3;
    return DialogState(bits);
  }

  Ontology ontology_;
  DaeModel dae_;
  DiscriminatorSet disc_;
};

TEST_F(EstimatorTest, ScoresArePureAndInsideUnitInterval) {
  const RewardEstimator est = Make();
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const DialogState s = RandomState(rng);
    const DialogAction a{UniformInt(rng, 0, ontology_.action_dim() - 1)};
    const LevelScores y = est.ScoreLevels(s, a);
    EXPECT_EQ(y, est.ScoreLevels(s, a));
    for (double v : y) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST_F(EstimatorTest, BatchedScoresMatchSingle) {
  const RewardEstimator est = Make();
  Rng rng(5);
  std::vector<DialogState> states;
  std::vector<int> actions;
  for (int i = 0; i < 20; ++i) {
    states.push_back(RandomState(rng));
    actions.push_back(UniformInt(rng, 0, ontology_.action_dim() - 1));
  }
  const nn::Matrix y = est.ScoreLevels(StackStates(states), actions);
  for (int i = 0; i < 20; ++i) {
    const LevelScores s = est.ScoreLevels(states[i], DialogAction{actions[i]});
    for (int l = 0; l < kNumLevels; ++l) EXPECT_NEAR(y(i, l), s[l], 1e-12);
  }
}

TEST_F(EstimatorTest, ShapeAddsWeightedCombinedScore) {
  Rng rng(6);
  const DialogState s = RandomState(rng);
  const DialogAction a{3};
  ShapingParams p;
  p.alpha = 0.0;
  EXPECT_EQ(Make(p).Shape(-1.0, s, a), -1.0);
  p.alpha = 5.0;
  const RewardEstimator est = Make(p);
  const double combined = est.Combined(s, a);
  EXPECT_DOUBLE_EQ(est.Shape(-1.0, s, a), -1.0 + 5.0 * combined);
  EXPECT_DOUBLE_EQ(
      combined,
      Combine(p.combination, GatedRewards(est.ScoreLevels(s, a), p.tau, p.b)));
  CachedScorer cache(&est);
  EXPECT_DOUBLE_EQ(cache.Shape(-1.0, s, a), est.Shape(-1.0, s, a));
  EXPECT_DOUBLE_EQ(cache.Shape(-1.0, s, a), est.Shape(-1.0, s, a));
  EXPECT_EQ(cache.size(), 1u);
}

TEST_F(EstimatorTest, ManifestRoundTripAndHashChecks) {
  const auto dir = testing::TempDir("shaping_manifest");
  dae_.Save(dir / "dae.ckpt");
  AdversarialResult result;
  result.discriminators = disc_;
  AdversarialCheckpoint(result, ontology_, dae_, GanConfig{}, false)
      .Save(dir / "disc.ckpt");
  ShapingParams p;
  p.combination = Combination::kSeqAvg;
  nlohmann::json manifest = RewardEstimator::Manifest(
      ontology_, dir / "dae.ckpt", dir / "disc.ckpt", p);
  manifest["dae"] = "dae.ckpt";
  manifest["discriminators"] = "disc.ckpt";
  std::ofstream(dir / "est.json") << manifest.dump(2);

  const RewardEstimator loaded =
      RewardEstimator::Load(dir / "est.json", ontology_);
  EXPECT_EQ(loaded.params().combination, Combination::kSeqAvg);
  Rng rng(8);
  const DialogState s = RandomState(rng);
  EXPECT_EQ(loaded.ScoreLevels(s, DialogAction{5}),
            Make().ScoreLevels(s, DialogAction{5}));

  ShapingParams over;
  over.alpha = 0.0;
  EXPECT_EQ(RewardEstimator::Load(dir / "est.json", ontology_, over)
                .params()
                .alpha,
            0.0);

  EXPECT_THROW(RewardEstimator::Load(dir / "est.json",
                                     testing::MicroOntology()),
               ConfigError);

  std::ofstream(dir / "dae.ckpt", std::ios::app) << "x";
  EXPECT_THROW(RewardEstimator::Load(dir / "est.json", ontology_),
               ConfigError);
}

TEST_F(EstimatorTest, DiscriminatorsRejectForeignDae) {
  AdversarialResult result;
  result.discriminators = disc_;
  const Checkpoint ckpt =
      AdversarialCheckpoint(result, ontology_, dae_, GanConfig{}, false);
  Rng rng(99);
  const DaeModel other(ontology_, DaeConfig{}, rng);
  EXPECT_THROW(LoadDiscriminators(ckpt, ontology_, other), ConfigError);
  EXPECT_EQ(LoadDiscriminators(ckpt, ontology_, dae_), disc_);
}

}  // namespace
}  // namespace seqreward
