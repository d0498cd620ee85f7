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

#include "seqreward/agents.h"

#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "seqreward/errors.h"
#include "test_util.h"

namespace seqreward {
namespace {

using nn::Matrix;

TEST(EpsilonTest, LinearDecayThenFlat) {
  EXPECT_DOUBLE_EQ(EpsilonAt(0, 0.1, 0.01, 50000), 0.1);
  EXPECT_NEAR(EpsilonAt(25000, 0.1, 0.01, 50000), 0.055, 1e-12);
  EXPECT_DOUBLE_EQ(EpsilonAt(50000, 0.1, 0.01, 50000), 0.01);
  EXPECT_DOUBLE_EQ(EpsilonAt(90000, 0.1, 0.01, 50000), 0.01);
}

DialogState Marker(int dim, int value) {
  DialogState s(dim);
  for (int b = 0; b < dim && b < 16; ++b) s.Set(b, (value >> b) & 1);
  return s;
}

TEST(ReplayBufferTest, FifoEviction) {
  ReplayBuffer buf(5, 16);
  for (int i = 0; i < 8; ++i) {
    buf.Add(Marker(16, i), i, i, Marker(16, i), false);
  }
  EXPECT_EQ(buf.size(), 5);
  Rng rng(1);
  std::set<int> seen;
  const ReplayBatch b = buf.Sample(500, rng);
  for (int a : b.actions) seen.insert(a);
  EXPECT_EQ(seen, (std::set<int>{3, 4, 5, 6, 7}));
  for (int r = 0; r < 500; ++r) EXPECT_EQ(b.rewards(r), b.actions[r]);
}

TEST(ReplayBufferTest, UniformSampling) {
  constexpr int kN = 20;
  ReplayBuffer buf(kN, 4);
  for (int i = 0; i < kN; ++i) buf.Add(DialogState(4), i, 0, DialogState(4), false);
  Rng rng(2);
  std::vector<int> counts(kN, 0);
  constexpr int kDraws = 40000;
  for (int a : buf.Sample(kDraws, rng).actions) ++counts[a];
  double chi2 = 0.0;
  const double e = static_cast<double>(kDraws) / kN;
  for (int c : counts) chi2 += (c - e) * (c - e) / e;
  // 1% critical value of chi-square with 19 degrees of freedom.
  EXPECT_LT(chi2, 36.19);
}

class PolicyTest : public ::testing::Test {
 protected:
  Ontology ontology_ = testing::DefaultOntology();
};

TEST_F(PolicyTest, ExpertSucceedsRandomFails) {
  const EvalResult expert =
      EvaluatePolicy(ontology_, EnvConfig{}, ExpertPolicy(ontology_), 500, 3);
  EXPECT_GE(expert.success_rate, 0.95);
  const EvalResult random = EvaluatePolicy(
      ontology_, EnvConfig{}, RandomPolicy(ontology_.action_dim(), 4), 500, 3);
  EXPECT_LE(random.success_rate, 0.05);
}

TEST_F(PolicyTest, RewardScoreMatchesClosedForm) {
  // Per dialog the score is -T + 80 on success and -T - 40 on failure, so
  // the mean is 120 * success - 40 - mean(T).
  for (const BatchPolicy& p :
       {ExpertPolicy(ontology_), RandomPolicy(ontology_.action_dim(), 5)}) {
    const EvalResult r = EvaluatePolicy(ontology_, EnvConfig{}, p, 300, 6);
    EXPECT_NEAR(r.reward_score, 120.0 * r.success_rate - 40.0 - r.avg_turn,
                1e-9);
  }
}

TEST_F(PolicyTest, EvaluatorMatchesAcrossParallelism) {
  Evaluator wide(ontology_, EnvConfig{}, 256);
  Evaluator narrow(ontology_, EnvConfig{}, 7);
  const BatchPolicy p = ExpertPolicy(ontology_);
  const EvalResult a = wide.Run(p, 100, 9);
  const EvalResult b = narrow.Run(p, 100, 9);
  EXPECT_EQ(a.success_rate, b.success_rate);
  EXPECT_EQ(a.avg_turn, b.avg_turn);
}

TEST(GaeTest, MatchesDirectSums) {
  const std::vector<double> r = {1.0, -1.0, 2.0, 0.5, -3.0};
  const std::vector<double> v = {0.3, -0.2, 0.9, 0.1, 0.4, 0.7};
  const std::vector<char> done = {0, 0, 1, 0, 0};
  const double g = 0.9, l = 0.8;
  std::vector<double> adv, ret;
  ComputeGae(r, v, done, g, l, &adv, &ret);
  ASSERT_EQ(adv.size(), 5u);
  for (int t = 0; t < 5; ++t) {
    double a = 0.0, w = 1.0;
    for (int k = t; k < 5; ++k) {
      const double next = done[k] ? 0.0 : v[k + 1];
      a += w * (r[k] + g * next - v[k]);
      if (done[k]) break;
      w *= g * l;
    }
    EXPECT_NEAR(adv[t], a, 1e-12) << t;
    EXPECT_NEAR(ret[t], a + v[t], 1e-12) << t;
  }
}

DqnConfig SmallDqn() {
  DqnConfig c;
  c.total_frames = 1200;
  c.train_every = 200;
  c.batches_per_train = 20;
  c.eval_every = 400;
  c.eval_dialogs = 40;
  c.warm_start_updates = 300;
  return c;
}

TEST_F(PolicyTest, DqnCurveIsDeterministic) {
  const DqnConfig c = SmallDqn();
  const TrainOutput a = DqnTrain(ontology_, EnvConfig{}, nullptr, c, 11);
  const TrainOutput b = DqnTrain(ontology_, EnvConfig{}, nullptr, c, 11);
  EXPECT_EQ(a.curve.ToCsv(), b.curve.ToCsv());
  ASSERT_EQ(a.curve.points.size(), 4u);
  EXPECT_EQ(a.curve.points.back().frames, 1200);
  EXPECT_EQ(a.frames, 1200);
  EXPECT_EQ(a.agent->q_net(), b.agent->q_net());
  const LearningCurve back = LearningCurve::FromCsv(a.curve.ToCsv());
  EXPECT_EQ(back.ToCsv(), a.curve.ToCsv());
}

TEST_F(PolicyTest, ShapingNeverReachesEvaluation) {
  Rng rng(1);
  DaeModel dae(ontology_, DaeConfig{}, rng);
  DiscriminatorSet disc(dae.latent_dim(), dae.level_sizes(), 64, rng);
  const RewardEstimator est(ontology_, dae, disc, ShapingParams{});
  DqnConfig c = SmallDqn();
  c.total_frames = 0;
  const TrainOutput shaped = DqnTrain(ontology_, EnvConfig{}, &est, c, 3);
  const TrainOutput plain = DqnTrain(ontology_, EnvConfig{}, nullptr, c, 3);
  // Same initial network, so the frame-0 evaluation must agree exactly.
  EXPECT_EQ(shaped.curve.ToCsv(), plain.curve.ToCsv());
  EXPECT_LE(shaped.curve.Final().reward_score, 80.0);
}

TEST_F(PolicyTest, WarmStartFillsBufferAndBeatsColdStart) {
  const ExpertCorpus corpus = GenerateExpertCorpus(ontology_, 200, 21);
  DqnConfig c = SmallDqn();
  c.total_frames = 0;
  c.eval_dialogs = 200;
  c.warm_start_updates = DqnConfig{}.warm_start_updates;
  const TrainOutput warm =
      WdqnTrain(ontology_, EnvConfig{}, nullptr, corpus, c, 4);
  const TrainOutput cold = DqnTrain(ontology_, EnvConfig{}, nullptr, c, 4);
  EXPECT_GE(warm.agent->buffer().size(),
            std::min(corpus.size(), c.buffer_capacity));
  EXPECT_GT(warm.curve.Final().success_rate,
            cold.curve.Final().success_rate + 0.2);
}

TEST_F(PolicyTest, ExpertTransitionsReplayTheCorpus) {
  const ExpertCorpus corpus = GenerateExpertCorpus(ontology_, 20, 8);
  const std::vector<Transition> t =
      ExpertTransitions(ontology_, corpus, EnvConfig{});
  ASSERT_EQ(static_cast<int>(t.size()), corpus.size());
  for (int i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(t[i].state, corpus.states[i]);
    EXPECT_EQ(t[i].action, corpus.actions[i]);
  }
}

TEST_F(PolicyTest, PpoProbabilitiesAreDistributions) {
  Rng rng(5);
  PpoAgent agent(ontology_.state_dim(), ontology_.action_dim(), PpoConfig{},
                 rng);
  const ExpertCorpus corpus = GenerateExpertCorpus(ontology_, 5, 2);
  const Matrix p = agent.Probabilities(StackStates(corpus.states));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
    EXPECT_GT(p.row(r).minCoeff(), 0.0);
  }
  const nn::Vector b = agent.BehaviorProbabilities(corpus.states[0]);
  EXPECT_NEAR(b.sum(), 1.0, 1e-12);
  EXPECT_GE(b.minCoeff(), 0.001 / ontology_.action_dim() - 1e-15);
}

TEST_F(PolicyTest, ZeroClipLeavesPolicyUnchanged) {
  PpoConfig c;
  c.clip = 0.0;
  // One full-batch minibatch, so the update sees exactly the forward pass
  // the old log-probabilities were taken from.
  c.minibatch_size = 1000;
  Rng rng(6);
  PpoAgent agent(ontology_.state_dim(), ontology_.action_dim(), c, rng);
  const ExpertCorpus corpus = GenerateExpertCorpus(ontology_, 10, 3);
  PpoAgent::Rollout ro;
  ro.states = StackStates(corpus.states);
  const Matrix p = agent.Probabilities(ro.states);
  const int n = static_cast<int>(ro.states.rows());
  ro.old_log_probs = nn::Vector(n);
  ro.advantages = nn::Vector(n);
  ro.returns = nn::Vector(n);
  for (int i = 0; i < n; ++i) {
    ro.actions.push_back(corpus.actions[i].index);
    const double eps = c.exploration_epsilon;
    ro.old_log_probs(i) = std::log((1.0 - eps) * p(i, ro.actions[i]) +
                                   eps / ontology_.action_dim());
    ro.advantages(i) = (i % 2 ? 1.0 : -1.0) * (1 + i % 3);
    ro.returns(i) = i;
  }
  const nn::DenseNet before = agent.policy();
  agent.Update(ro, rng);
  EXPECT_EQ(agent.policy(), before);
}

TEST_F(PolicyTest, ImitationBeatsRandom) {
  const ExpertCorpus corpus = GenerateExpertCorpus(ontology_, 300, 31);
  PpoConfig c;
  c.total_frames = 0;
  c.eval_dialogs = 200;
  const PpoTrainOutput out =
      PpoTrain(ontology_, EnvConfig{}, nullptr, corpus, c, 7);
  const EvalResult random = EvaluatePolicy(
      ontology_, EnvConfig{}, RandomPolicy(ontology_.action_dim(), 1), 200,
      c.eval_seed);
  EXPECT_GT(out.imitation_accuracy, 0.8);
  EXPECT_GT(out.after_imitation.success_rate, random.success_rate);
}

TEST_F(PolicyTest, PpoCurveIsDeterministic) {
  const ExpertCorpus corpus = GenerateExpertCorpus(ontology_, 30, 1);
  PpoConfig c;
  c.total_frames = 1000;
  c.eval_every = 500;
  c.eval_dialogs = 30;
  c.bc_max_epochs = 3;
  const PpoTrainOutput a = PpoTrain(ontology_, EnvConfig{}, nullptr, corpus, c, 2);
  const PpoTrainOutput b = PpoTrain(ontology_, EnvConfig{}, nullptr, corpus, c, 2);
  EXPECT_EQ(a.curve.ToCsv(), b.curve.ToCsv());
  EXPECT_EQ(a.curve.points.size(), 3u);
}

}  // namespace
}  // namespace seqreward
