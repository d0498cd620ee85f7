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

#ifndef SEQREWARD_AGENTS_H_
#define SEQREWARD_AGENTS_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqreward/dialog_env.h"
#include "seqreward/neural.h"
#include "seqreward/ontology.h"
#include "seqreward/shaping.h"

namespace seqreward {

// ---------------------------------------------------------------------------
// Evaluation.

// Maps a batch of states (one per row) to one action index per row.
using BatchPolicy =
    std::function<void(const nn::Matrix& states, std::vector<int>* actions)>;

struct EvalResult {
  double success_rate = 0.0;
  double reward_score = 0.0;  // mean undiscounted return of r_ori
  double avg_turn = 0.0;
};

// Runs n_dialogs episodes side by side; dialog i uses goal seed
// DeriveSeed(seed, i). Rewards are always the environment's own.
EvalResult EvaluatePolicy(const Ontology& ontology, const EnvConfig& env_config,
                          const BatchPolicy& policy, int n_dialogs,
                          std::uint64_t seed);

// Reusable pool of environments for repeated evaluation.
class Evaluator {
 public:
  Evaluator(const Ontology& ontology, const EnvConfig& env_config,
            int max_parallel = 256);
  EvalResult Run(const BatchPolicy& policy, int n_dialogs,
                 std::uint64_t seed);

 private:
  std::vector<DialogEnv> envs_;
  int state_dim_;
};

BatchPolicy ExpertPolicy(const Ontology& ontology);
// Uniform over the action space; deterministic given the seed and the call
// sequence.
BatchPolicy RandomPolicy(int action_dim, std::uint64_t seed);

struct CurvePoint {
  std::int64_t frames = 0;
  double success_rate = 0.0;
  double reward_score = 0.0;
  double avg_turn = 0.0;
  std::uint64_t seed = 0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;

  // Header: frames,success_rate,reward_score,avg_turn,seed
  void WriteCsv(std::ostream& out) const;
  std::string ToCsv() const;
  static LearningCurve FromCsv(const std::string& text);
  // First evaluated frame count whose success rate reaches threshold.
  std::optional<std::int64_t> FramesToReach(double threshold) const;
  const CurvePoint& Final() const;
};

// ---------------------------------------------------------------------------
// Replay and exploration.

struct ReplayBatch {
  nn::Matrix states;
  std::vector<int> actions;
  nn::Vector rewards;
  nn::Matrix next_states;
  nn::Vector done;
  std::vector<char> expert;  // rows that came from expert demonstrations
  std::vector<int> indices;  // slots sampled, for diagnostics
};

// FIFO ring buffer with uniform sampling over the current contents.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int state_dim);

  int capacity() const { return capacity_; }
  int size() const { return size_; }
  void Add(const DialogState& s, int action, double reward,
           const DialogState& next, bool done, bool expert = false);
  ReplayBatch Sample(int n, Rng& rng) const;

 private:
  int capacity_;
  int size_ = 0;
  int next_ = 0;
  nn::Matrix states_;
  nn::Matrix next_states_;
  std::vector<int> actions_;
  nn::Vector rewards_;
  nn::Vector done_;
  std::vector<char> expert_;
};

// Linear decay from start to end over decay_frames, constant after.
double EpsilonAt(std::int64_t frame, double start, double end,
                 std::int64_t decay_frames);

// ---------------------------------------------------------------------------
// Value-based agents.

struct DqnConfig {
  int hidden = 100;
  std::int64_t total_frames = 100000;
  int train_every = 200;
  int batches_per_train = 500;
  int batch_size = 16;
  double epsilon_start = 0.1;
  double epsilon_end = 0.01;
  std::int64_t epsilon_decay_frames = 50000;
  int buffer_capacity = 50000;
  int target_sync_frames = 1000;
  double gamma = 0.99;
  double learning_rate = 1e-3;
  double huber_delta = 10.0;
  std::int64_t eval_every = 1000;
  int eval_dialogs = 1000;
  std::uint64_t eval_seed = 20260101;
  // Warm start (WDQN only).
  int warm_start_updates = 10000;
  double margin = 10.0;
  double margin_weight = 10.0;

  nlohmann::json ToJson() const;
  static DqnConfig FromJson(const nlohmann::json& j);
};

// Optimizer state points into the networks, so agents stay in place.
class QAgent {
 public:
  QAgent(int state_dim, int action_dim, const DqnConfig& config, Rng& rng);
  QAgent(const QAgent&) = delete;
  QAgent& operator=(const QAgent&) = delete;

  const nn::DenseNet& q_net() const { return q_; }
  const nn::DenseNet& target_net() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const DqnConfig& config() const { return config_; }

  nn::Matrix QValues(const nn::Matrix& states) const;
  int Greedy(const DialogState& state) const;
  BatchPolicy GreedyPolicy() const;

  void SyncTarget() { target_ = q_; }
  // One update on a uniform minibatch; returns the loss. With use_margin
  // the large-margin loss is added on rows flagged expert.
  double TrainStep(Rng& rng, bool use_margin = false);
  double Update(const ReplayBatch& batch, bool use_margin);

  Checkpoint ToCheckpoint() const;

 private:
  DqnConfig config_;
  nn::DenseNet q_;
  nn::DenseNet target_;
  nn::Adam opt_;
  ReplayBuffer buffer_;
};

struct TrainOutput {
  LearningCurve curve;
  std::int64_t frames = 0;
  int episodes = 0;
  std::unique_ptr<QAgent> agent;
};

// Optional estimator: when null the agent learns from r_ori alone.
TrainOutput DqnTrain(const Ontology& ontology, const EnvConfig& env_config,
                     const RewardEstimator* est, const DqnConfig& config,
                     std::uint64_t seed);

// Re-simulates the corpus dialogs to recover full transitions. Throws
// ConfigError when the corpus was not produced by the expert under this
// ontology and environment configuration.
std::vector<Transition> ExpertTransitions(const Ontology& ontology,
                                          const ExpertCorpus& corpus,
                                          const EnvConfig& env_config);

// Pre-fills the buffer with expert transitions, runs the supervised warm
// start, then continues as DqnTrain. The curve starts at frame 0 after
// the warm start.
TrainOutput WdqnTrain(const Ontology& ontology, const EnvConfig& env_config,
                      const RewardEstimator* est, const ExpertCorpus& corpus,
                      const DqnConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Policy-gradient agent.

struct PpoConfig {
  int hidden = 100;
  std::int64_t total_frames = 100000;
  int update_every = 500;
  int epochs = 4;
  int minibatch_size = 64;
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double value_loss_coef = 1.0;
  double entropy_coef = 0.0;
  double exploration_epsilon = 0.001;
  double learning_rate = 1e-4;
  double value_learning_rate = 1e-3;
  // Imitation warm-up.
  int bc_max_epochs = 50;
  int bc_patience = 3;
  int bc_batch_size = 64;
  double bc_learning_rate = 1e-3;
  double bc_validation_fraction = 0.1;
  std::int64_t eval_every = 1000;
  int eval_dialogs = 1000;
  std::uint64_t eval_seed = 20260101;

  nlohmann::json ToJson() const;
  static PpoConfig FromJson(const nlohmann::json& j);
};

class PpoAgent {
 public:
  PpoAgent(int state_dim, int action_dim, const PpoConfig& config, Rng& rng);
  PpoAgent(const PpoAgent&) = delete;
  PpoAgent& operator=(const PpoAgent&) = delete;

  const PpoConfig& config() const { return config_; }
  nn::DenseNet& policy() { return policy_; }
  nn::DenseNet& value() { return value_; }
  const nn::DenseNet& policy() const { return policy_; }

  // Rows are action distributions (softmax output).
  nn::Matrix Probabilities(const nn::Matrix& states) const;
  // Probabilities mixed with epsilon-uniform exploration.
  nn::Vector BehaviorProbabilities(const DialogState& state) const;
  BatchPolicy GreedyPolicy() const;

  // Behaviour cloning until held-out accuracy stops improving; returns the
  // best held-out accuracy.
  double Imitate(const ExpertCorpus& corpus, Rng& rng);

  struct Rollout {
    nn::Matrix states;
    std::vector<int> actions;
    nn::Vector old_log_probs;
    nn::Vector advantages;
    nn::Vector returns;
  };
  struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
  };
  UpdateStats Update(const Rollout& rollout, Rng& rng);

  Checkpoint ToCheckpoint() const;

 private:
  PpoConfig config_;
  nn::DenseNet policy_;
  nn::DenseNet value_;
  nn::Adam policy_opt_;
  nn::Adam value_opt_;
};

struct PpoTrainOutput {
  LearningCurve curve;
  double imitation_accuracy = 0.0;
  EvalResult after_imitation;
  std::unique_ptr<PpoAgent> agent;
};

PpoTrainOutput PpoTrain(const Ontology& ontology, const EnvConfig& env_config,
                        const RewardEstimator* est, const ExpertCorpus& corpus,
                        const PpoConfig& config, std::uint64_t seed);

// Generalized advantage estimates for one trajectory segment. values has
// one more entry than rewards (bootstrap value, zero when terminal).
void ComputeGae(const std::vector<double>& rewards,
                const std::vector<double>& values,
                const std::vector<char>& dones, double gamma, double lambda,
                std::vector<double>* advantages, std::vector<double>* returns);

}  // namespace seqreward

#endif  // SEQREWARD_AGENTS_H_
