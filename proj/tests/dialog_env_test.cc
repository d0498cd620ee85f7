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

#include "seqreward/dialog_env.h"

#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "seqreward/errors.h"
#include "seqreward/random.h"
#include "test_util.h"

namespace seqreward {
namespace {

class DialogEnvTest : public ::testing::Test {
 protected:
  Ontology ontology_ = testing::DefaultOntology();
  DialogEnv env_{ontology_};
  const StateLayout& layout() { return env_.layout(); }
  const AssignmentMatrix& m() { return env_.assignment(); }
  int Action(int d, int a, int s) { return m().Find({d, a, s}); }
};

TEST_F(DialogEnvTest, LayoutMatchesOntologyStateDim) {
  EXPECT_EQ(layout().dim(), ontology_.state_dim());
  EXPECT_EQ(StateLayout::RequiredDim(ontology_), 103);
  EXPECT_EQ(layout().Describe(ontology_).size(), 103u);
}

TEST_F(DialogEnvTest, GoalGoldenSeedZero) {
  UserGoal goal = SampleGoal(0, ontology_);
  // Frozen output of the seeded sampler.
  const std::string golden = R"([{"constraints":["price","people"],"domain":"restaurant","requests":["area"]},{"constraints":["area"],"domain":"hotel","requests":["day","address"]}])";
  EXPECT_EQ(goal.ToJson(ontology_).dump(), golden);
  EXPECT_EQ(SampleGoal(0, ontology_), goal);
}

TEST(GoalTest, SingleDomainOntologyUsesThatDomain) {
  Ontology micro = testing::MicroOntology();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    UserGoal g = SampleGoal(seed, micro);
    ASSERT_EQ(g.domains.size(), 1u);
    EXPECT_EQ(g.domains[0].domain, 0);
    EXPECT_EQ(g.domains[0].constraints.size(), 1u);
    EXPECT_EQ(g.domains[0].requests.size(), 1u);
  }
}

TEST_F(DialogEnvTest, GoalInvariantsAndMixingProbability) {
  EnvConfig config;
  int two = 0;
  const int n = 10000;
  for (int seed = 0; seed < n; ++seed) {
    UserGoal g = SampleGoal(seed, ontology_, config);
    ASSERT_GE(g.domains.size(), 1u);
    ASSERT_LE(g.domains.size(), 2u);
    if (g.domains.size() == 2) {
      ++two;
      EXPECT_NE(g.domains[0].domain, g.domains[1].domain);
    }
    for (const auto& dg : g.domains) {
      EXPECT_GE(dg.constraints.size(), 1u);
      EXPECT_GE(dg.requests.size(), 1u);
      for (int c : dg.constraints) {
        EXPECT_TRUE(ontology_.IsValid({dg.domain, layout().request_act(), c}));
        for (int r : dg.requests) EXPECT_NE(c, r);
      }
      for (int r : dg.requests)
        EXPECT_TRUE(ontology_.IsValid({dg.domain, layout().inform_act(), r}));
    }
  }
  EXPECT_NEAR(static_cast<double>(two) / n, config.multi_domain_prob, 0.02);
}

TEST_F(DialogEnvTest, RequestAndInformRules) {
  UserGoal goal;
  goal.domains.push_back({0, {0}, {4}});  // restaurant: area -> phone
  DialogState s = env_.Reset(goal);
  EXPECT_TRUE(s.Get(layout().NeededBit(0, 0)));
  EXPECT_TRUE(s.Get(layout().PendingBit(0, 4)));
  EXPECT_TRUE(s.Get(layout().UserActBit(0, UserActType::kOpen)));

  StepResult r = env_.Step({Action(0, layout().request_act(), 0)});
  EXPECT_TRUE(r.state.Get(layout().InformedBit(0, 0)));
  EXPECT_TRUE(r.state.Get(layout().UserActBit(0, UserActType::kInform)));
  EXPECT_DOUBLE_EQ(r.r_ori, -1.0);

  r = env_.Step({Action(0, layout().inform_act(), 4)});
  EXPECT_TRUE(r.state.Get(layout().SatisfiedBit(0, 4)));
  EXPECT_FALSE(r.done);

  r = env_.Step({Action(0, layout().book_act(), layout().BookSlot(0))});
  EXPECT_TRUE(r.done);
  ASSERT_TRUE(r.success.has_value());
  EXPECT_TRUE(*r.success);
  EXPECT_DOUBLE_EQ(r.r_ori, -1.0 + 80.0);
  EXPECT_EQ(env_.turns(), 3);
  EXPECT_THROW(env_.Step({0}), ContractViolation);
}

TEST_F(DialogEnvTest, BookingBeforeReadyIsUnhelpful) {
  UserGoal goal;
  goal.domains.push_back({0, {0}, {4}});
  env_.Reset(goal);
  StepResult r = env_.Step({Action(0, layout().book_act(), layout().BookSlot(0))});
  EXPECT_FALSE(r.done);
  EXPECT_FALSE(r.state.Get(layout().BookedBit(0)));
  EXPECT_TRUE(r.state.Get(layout().UserActBit(0, UserActType::kNegate)));
  EXPECT_EQ(env_.user().patience(), EnvConfig{}.patience - 1);
}

TEST_F(DialogEnvTest, PatienceExhaustionFails) {
  env_.Reset(std::uint64_t{3});
  StepResult r;
  int steps = 0;
  const int reqmore = ontology_.ActIndex("reqmore");
  while (!env_.done()) {
    r = env_.Step({Action(env_.current_goal_domain(), reqmore,
                          layout().BookSlot(env_.current_goal_domain()))});
    ++steps;
  }
  EXPECT_EQ(steps, EnvConfig{}.patience);
  ASSERT_TRUE(r.success.has_value());
  EXPECT_FALSE(*r.success);
  EXPECT_DOUBLE_EQ(r.r_ori, -1.0 - 40.0);
}

TEST_F(DialogEnvTest, MaxTurnsCapFails) {
  EnvConfig config;
  config.patience = 1000;
  DialogEnv env(ontology_, config);
  env.Reset(std::uint64_t{11});
  StepResult r;
  while (!env.done()) r = env.Step({0});
  EXPECT_EQ(env.turns(), 20);
  EXPECT_FALSE(*r.success);
}

TEST(EpisodeRewardTest, ClosedForm) {
  EXPECT_DOUBLE_EQ(EpisodeReward(5, true), 75.0);
  EXPECT_DOUBLE_EQ(EpisodeReward(1, false), -41.0);
  for (int t = 1; t <= 30; ++t) {
    EXPECT_DOUBLE_EQ(EpisodeReward(t, true) - EpisodeReward(t, false), 120.0);
  }
  EXPECT_THROW(EpisodeReward(0, true), InvalidInputError);
}

TEST_F(DialogEnvTest, ExpertRuleExamples) {
  UserGoal goal;
  goal.domains.push_back({1, {2}, {5}});  // hotel: day -> address
  DialogState s = env_.Reset(goal);
  // Constraint first.
  EXPECT_EQ(ExpertAction(layout(), m(), s).index,
            Action(1, layout().request_act(), 2));
  s = env_.Step(ExpertAction(layout(), m(), s)).state;
  // One pending request: answer it with inform.
  EXPECT_EQ(ExpertAction(layout(), m(), s).index,
            Action(1, layout().inform_act(), 5));
  s = env_.Step(ExpertAction(layout(), m(), s)).state;
  // Everything satisfied: book.
  EXPECT_EQ(ExpertAction(layout(), m(), s).index,
            Action(1, layout().book_act(), layout().BookSlot(1)));
}

// Runs one episode with the given policy and checks the per-step
// invariants shared by every test below.
template <typename Policy>
std::vector<Transition> RunEpisode(DialogEnv& env, std::uint64_t seed,
                                   Policy policy) {
  std::vector<Transition> trace;
  DialogState s = env.Reset(seed);
  while (!env.done()) {
    DialogAction a = policy(s);
    StepResult r = env.Step(a);
    trace.push_back({s, a, r.r_ori, r.r_ori, r.state, r.done, r.success});
    s = r.state;
  }
  return trace;
}

TEST_F(DialogEnvTest, IncrementalReturnEqualsClosedForm) {
  Rng rng(7);
  auto expert = [&](const DialogState& s) { return ExpertAction(layout(), m(), s); };
  auto random = [&](const DialogState&) {
    return DialogAction{UniformInt(rng, 0, m().action_dim() - 1)};
  };
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    for (int p = 0; p < 2; ++p) {
      auto trace = p == 0 ? RunEpisode(env_, seed, expert)
                          : RunEpisode(env_, seed, random);
      double total = 0.0;
      for (const auto& t : trace) {
        total += t.r_ori;
        EXPECT_EQ(t.state.size(), ontology_.state_dim());
        for (auto b : t.next_state.bits()) EXPECT_LE(b, 1);
        EXPECT_LT(t.action.index, m().action_dim());
      }
      ASSERT_TRUE(trace.back().success.has_value());
      EXPECT_DOUBLE_EQ(total, EpisodeReward(static_cast<int>(trace.size()),
                                            *trace.back().success));
    }
  }
}

TEST_F(DialogEnvTest, SameSeedSameTrace) {
  auto run = [&]() {
    Rng rng(99);
    DialogEnv env(ontology_);
    std::ostringstream out;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      WriteTrace(out, ontology_, RunEpisode(env, seed, [&](const DialogState&) {
                   return DialogAction{UniformInt(rng, 0, 47)};
                 }));
    }
    return out.str();
  };
  EXPECT_EQ(run(), run());
}

TEST_F(DialogEnvTest, ExpertSolvesTheEnvironment) {
  int success = 0;
  for (int i = 0; i < 1000; ++i) {
    auto trace = RunEpisode(env_, DeriveSeed(1234, i), [&](const DialogState& s) {
      return ExpertAction(layout(), m(), s);
    });
    success += *trace.back().success;
  }
  EXPECT_GE(success, 950);
}

TEST_F(DialogEnvTest, ExpertActsInTheGoalDomain) {
  ExpertCorpus corpus = GenerateExpertCorpus(ontology_, 1, 5);
  (void)corpus;
  int pairs = 0;
  for (int i = 0; pairs < 5000; ++i) {
    DialogState s = env_.Reset(DeriveSeed(77, i));
    while (!env_.done() && pairs < 5000) {
      DialogAction a = ExpertAction(layout(), m(), s);
      EXPECT_EQ(m().Row(a.index).domain, env_.current_goal_domain());
      s = env_.Step(a).state;
      ++pairs;
    }
  }
}

TEST_F(DialogEnvTest, CorpusForOneDialogMatchesEpisodeLength) {
  ExpertCorpus corpus = GenerateExpertCorpus(ontology_, 1, 42);
  auto trace = RunEpisode(env_, DeriveSeed(42, 0), [&](const DialogState& s) {
    return ExpertAction(layout(), m(), s);
  });
  EXPECT_EQ(corpus.size(), static_cast<int>(trace.size()));
  EXPECT_EQ(corpus.ontology_hash, ontology_.Hash());
}

TEST_F(DialogEnvTest, CorpusIsDeterministicAndSized) {
  ExpertCorpus a = GenerateExpertCorpus(ontology_, 1000, 2024);
  ExpertCorpus b = GenerateExpertCorpus(ontology_, 1000, 2024);
  EXPECT_EQ(a.Serialize(), b.Serialize());
  EXPECT_GE(a.size(), 6000);
  EXPECT_LE(a.size(), 12000);
  for (const auto& act : a.actions) {
    EXPECT_GE(act.index, 0);
    EXPECT_LT(act.index, ontology_.action_dim());
  }
  EXPECT_THROW(GenerateExpertCorpus(ontology_, 0, 1), InvalidInputError);
}

TEST_F(DialogEnvTest, CorpusFileRoundTrip) {
  ExpertCorpus a = GenerateExpertCorpus(ontology_, 20, 9);
  auto path = testing::TempDir("corpus") / "c.txt";
  a.Save(path);
  EXPECT_EQ(ExpertCorpus::Load(path), a);
  EXPECT_THROW(ExpertCorpus::Deserialize("garbage\n"), ConfigError);
}

TEST(AgendaUserTest, StackDiscipline) {
  UserGoal goal;
  goal.domains.push_back({0, {0}, {1}});
  goal.domains.push_back({2, {2}, {3}});
  AgendaUser user(goal, 3);
  user.Push({UserActType::kAck, 0, -1});
  EXPECT_EQ(user.Pop().type, UserActType::kAck);
  UserAct open = user.Pop();
  EXPECT_EQ(open.type, UserActType::kOpen);
  EXPECT_EQ(open.domain, 0);
  EXPECT_EQ(user.Pop().domain, 2);
  EXPECT_TRUE(user.AgendaEmpty());
  user.Judge(false);
  EXPECT_EQ(user.patience(), 2);
  user.Judge(true);
  EXPECT_EQ(user.patience(), 3);
}

TEST(MicroEnvTest, BooklessDomainCompletesWithoutBooking) {
  Ontology micro = testing::MicroOntology();
  DialogEnv env(micro);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DialogState s = env.Reset(seed);
    while (!env.done()) {
      s = env.Step(ExpertAction(env.layout(), env.assignment(), s)).state;
    }
    EXPECT_TRUE(env.success());
    EXPECT_EQ(env.turns(), 2);
  }
}

}  // namespace
}  // namespace seqreward
