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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "seqreward/checkpoint.h"
#include "seqreward/errors.h"
#include "seqreward/random.h"

namespace seqreward {

using nn::Matrix;
using nn::Vector;

namespace {

void CopyBits(const DialogState& s, Matrix& m, Eigen::Index row) {
  const auto& bits = s.bits();
  for (std::size_t c = 0; c < bits.size(); ++c) {
    m(row, static_cast<Eigen::Index>(c)) = bits[c];
  }
}

int ArgMaxRow(const Matrix& m, Eigen::Index row) {
  Eigen::Index arg;
  m.row(row).maxCoeff(&arg);
  return static_cast<int>(arg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Evaluation.

Evaluator::Evaluator(const Ontology& ontology, const EnvConfig& env_config,
                     int max_parallel)
    : state_dim_(ontology.state_dim()) {
  if (max_parallel < 1) throw InvalidInputError("max_parallel must be >= 1");
  envs_.reserve(max_parallel);
  for (int i = 0; i < max_parallel; ++i) envs_.emplace_back(ontology, env_config);
}

EvalResult Evaluator::Run(const BatchPolicy& policy, int n_dialogs,
                          std::uint64_t seed) {
  if (n_dialogs < 1) throw InvalidInputError("n_dialogs must be >= 1");
  const int slots = std::min<int>(n_dialogs, static_cast<int>(envs_.size()));
  std::vector<int> slot_dialog(slots, -1);
  int next_dialog = 0;
  for (int k = 0; k < slots; ++k) {
    envs_[k].Reset(DeriveSeed(seed, static_cast<std::uint64_t>(next_dialog)));
    slot_dialog[k] = next_dialog++;
  }
  long successes = 0;
  long turns = 0;
  double reward = 0.0;
  std::vector<int> active;
  Matrix batch;
  std::vector<int> actions;
  while (true) {
    active.clear();
    for (int k = 0; k < slots; ++k) {
      if (slot_dialog[k] >= 0) active.push_back(k);
    }
    if (active.empty()) break;
    batch.resize(static_cast<Eigen::Index>(active.size()), state_dim_);
    for (std::size_t r = 0; r < active.size(); ++r) {
      CopyBits(envs_[active[r]].state(), batch, static_cast<Eigen::Index>(r));
    }
    actions.assign(active.size(), 0);
    policy(batch, &actions);
    for (std::size_t r = 0; r < active.size(); ++r) {
      DialogEnv& env = envs_[active[r]];
      const StepResult step = env.Step(DialogAction{actions[r]});
      reward += step.r_ori;
      if (!step.done) continue;
      turns += env.turns();
      if (env.success()) ++successes;
      if (next_dialog < n_dialogs) {
        env.Reset(DeriveSeed(seed, static_cast<std::uint64_t>(next_dialog)));
        slot_dialog[active[r]] = next_dialog++;
      } else {
        slot_dialog[active[r]] = -1;
      }
    }
  }
  EvalResult out;
  out.success_rate = static_cast<double>(successes) / n_dialogs;
  out.reward_score = reward / n_dialogs;
  out.avg_turn = static_cast<double>(turns) / n_dialogs;
  return out;
}

EvalResult EvaluatePolicy(const Ontology& ontology, const EnvConfig& env_config,
                          const BatchPolicy& policy, int n_dialogs,
                          std::uint64_t seed) {
  Evaluator ev(ontology, env_config, std::min(n_dialogs, 256));
  return ev.Run(policy, n_dialogs, seed);
}

BatchPolicy ExpertPolicy(const Ontology& ontology) {
  auto layout = std::make_shared<StateLayout>(ontology);
  auto m = std::make_shared<AssignmentMatrix>(BuildAssignmentMatrix(ontology));
  return [layout, m](const Matrix& states, std::vector<int>* actions) {
    for (Eigen::Index r = 0; r < states.rows(); ++r) {
      std::vector<std::uint8_t> bits(states.cols());
      for (Eigen::Index c = 0; c < states.cols(); ++c) {
        bits[c] = states(r, c) > 0.5 ? 1 : 0;
      }
      (*actions)[r] = ExpertAction(*layout, *m, DialogState(bits)).index;
    }
  };
}

BatchPolicy RandomPolicy(int action_dim, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng, action_dim](const Matrix& states, std::vector<int>* actions) {
    for (Eigen::Index r = 0; r < states.rows(); ++r) {
      (*actions)[r] = UniformInt(*rng, 0, action_dim - 1);
    }
  };
}

void LearningCurve::WriteCsv(std::ostream& out) const {
  out << "frames,success_rate,reward_score,avg_turn,seed\n";
  char buf[160];
  for (const CurvePoint& p : points) {
    std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,%llu\n",
                  static_cast<long long>(p.frames), p.success_rate,
                  p.reward_score, p.avg_turn,
                  static_cast<unsigned long long>(p.seed));
    out << buf;
  }
}

std::string LearningCurve::ToCsv() const {
  std::ostringstream out;
  WriteCsv(out);
  return out.str();
}

LearningCurve LearningCurve::FromCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "frames,success_rate,reward_score,avg_turn,seed") {
    throw ConfigError("learning curve csv has an unexpected header");
  }
  LearningCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CurvePoint p;
    long long frames;
    unsigned long long seed;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%llu", &frames,
                    &p.success_rate, &p.reward_score, &p.avg_turn,
                    &seed) != 5) {
      throw ConfigError("malformed learning curve row: " + line);
    }
    p.frames = frames;
    p.seed = seed;
    c.points.push_back(p);
  }
  return c;
}

std::optional<std::int64_t> LearningCurve::FramesToReach(
    double threshold) const {
  for (const CurvePoint& p : points) {
    if (p.success_rate >= threshold) return p.frames;
  }
  return std::nullopt;
}

const CurvePoint& LearningCurve::Final() const {
  if (points.empty()) throw ContractViolation("empty learning curve");
  return points.back();
}

// ---------------------------------------------------------------------------
// Replay and exploration.

ReplayBuffer::ReplayBuffer(int capacity, int state_dim)
    : capacity_(capacity),
      states_(capacity, state_dim),
      next_states_(capacity, state_dim),
      actions_(capacity, 0),
      rewards_(Vector::Zero(capacity)),
      done_(Vector::Zero(capacity)),
      expert_(capacity, 0) {
  if (capacity < 1) throw InvalidInputError("buffer capacity must be >= 1");
}

void ReplayBuffer::Add(const DialogState& s, int action, double reward,
                       const DialogState& next, bool done, bool expert) {
  CopyBits(s, states_, next_);
  CopyBits(next, next_states_, next_);
  actions_[next_] = action;
  rewards_(next_) = reward;
  done_(next_) = done ? 1.0 : 0.0;
  expert_[next_] = expert ? 1 : 0;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

ReplayBatch ReplayBuffer::Sample(int n, Rng& rng) const {
  if (size_ == 0) throw ContractViolation("sampling from an empty buffer");
  ReplayBatch b;
  b.states.resize(n, states_.cols());
  b.next_states.resize(n, states_.cols());
  b.rewards.resize(n);
  b.done.resize(n);
  b.actions.resize(n);
  b.expert.resize(n);
  b.indices.resize(n);
  for (int i = 0; i < n; ++i) {
    const int k = UniformInt(rng, 0, size_ - 1);
    b.indices[i] = k;
    b.states.row(i) = states_.row(k);
    b.next_states.row(i) = next_states_.row(k);
    b.actions[i] = actions_[k];
    b.rewards(i) = rewards_(k);
    b.done(i) = done_(k);
    b.expert[i] = expert_[k];
  }
  return b;
}

double EpsilonAt(std::int64_t frame, double start, double end,
                 std::int64_t decay_frames) {
  if (decay_frames <= 0 || frame >= decay_frames) return end;
  if (frame <= 0) return start;
  const double t = static_cast<double>(frame) / static_cast<double>(decay_frames);
  return start + (end - start) * t;
}

// ---------------------------------------------------------------------------
// Configs.

#define SEQREWARD_JSON_FIELD(field) {#field, field}
#define SEQREWARD_READ(field) c.field = j.value(#field, c.field)

nlohmann::json DqnConfig::ToJson() const {
  return {SEQREWARD_JSON_FIELD(hidden),
          SEQREWARD_JSON_FIELD(total_frames),
          SEQREWARD_JSON_FIELD(train_every),
          SEQREWARD_JSON_FIELD(batches_per_train),
          SEQREWARD_JSON_FIELD(batch_size),
          SEQREWARD_JSON_FIELD(epsilon_start),
          SEQREWARD_JSON_FIELD(epsilon_end),
          SEQREWARD_JSON_FIELD(epsilon_decay_frames),
          SEQREWARD_JSON_FIELD(buffer_capacity),
          SEQREWARD_JSON_FIELD(target_sync_frames),
          SEQREWARD_JSON_FIELD(gamma),
          SEQREWARD_JSON_FIELD(learning_rate),
          SEQREWARD_JSON_FIELD(huber_delta),
          SEQREWARD_JSON_FIELD(eval_every),
          SEQREWARD_JSON_FIELD(eval_dialogs),
          SEQREWARD_JSON_FIELD(eval_seed),
          SEQREWARD_JSON_FIELD(warm_start_updates),
          SEQREWARD_JSON_FIELD(margin),
          SEQREWARD_JSON_FIELD(margin_weight)};
}

DqnConfig DqnConfig::FromJson(const nlohmann::json& j) {
  DqnConfig c;
  try {
    SEQREWARD_READ(hidden);
    SEQREWARD_READ(total_frames);
    SEQREWARD_READ(train_every);
    SEQREWARD_READ(batches_per_train);
    SEQREWARD_READ(batch_size);
    SEQREWARD_READ(epsilon_start);
    SEQREWARD_READ(epsilon_end);
    SEQREWARD_READ(epsilon_decay_frames);
    SEQREWARD_READ(buffer_capacity);
    SEQREWARD_READ(target_sync_frames);
    SEQREWARD_READ(gamma);
    SEQREWARD_READ(learning_rate);
    SEQREWARD_READ(huber_delta);
    SEQREWARD_READ(eval_every);
    SEQREWARD_READ(eval_dialogs);
    SEQREWARD_READ(eval_seed);
    SEQREWARD_READ(warm_start_updates);
    SEQREWARD_READ(margin);
    SEQREWARD_READ(margin_weight);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad dqn config: ") + e.what());
  }
  if (c.hidden < 1 || c.total_frames < 0 || c.train_every < 1 ||
      c.batches_per_train < 0 || c.batch_size < 1 || c.buffer_capacity < 1 ||
      c.target_sync_frames < 1 || c.gamma < 0.0 || c.gamma > 1.0 ||
      c.eval_every < 1 || c.eval_dialogs < 1 || c.huber_delta <= 0.0) {
    throw ConfigError("dqn config out of range");
  }
  return c;
}

nlohmann::json PpoConfig::ToJson() const {
  return {SEQREWARD_JSON_FIELD(hidden),
          SEQREWARD_JSON_FIELD(total_frames),
          SEQREWARD_JSON_FIELD(update_every),
          SEQREWARD_JSON_FIELD(epochs),
          SEQREWARD_JSON_FIELD(minibatch_size),
          SEQREWARD_JSON_FIELD(clip),
          SEQREWARD_JSON_FIELD(gamma),
          SEQREWARD_JSON_FIELD(gae_lambda),
          SEQREWARD_JSON_FIELD(value_loss_coef),
          SEQREWARD_JSON_FIELD(entropy_coef),
          SEQREWARD_JSON_FIELD(exploration_epsilon),
          SEQREWARD_JSON_FIELD(learning_rate),
          SEQREWARD_JSON_FIELD(value_learning_rate),
          SEQREWARD_JSON_FIELD(bc_max_epochs),
          SEQREWARD_JSON_FIELD(bc_patience),
          SEQREWARD_JSON_FIELD(bc_batch_size),
          SEQREWARD_JSON_FIELD(bc_learning_rate),
          SEQREWARD_JSON_FIELD(bc_validation_fraction),
          SEQREWARD_JSON_FIELD(eval_every),
          SEQREWARD_JSON_FIELD(eval_dialogs),
          SEQREWARD_JSON_FIELD(eval_seed)};
}

PpoConfig PpoConfig::FromJson(const nlohmann::json& j) {
  PpoConfig c;
  try {
    SEQREWARD_READ(hidden);
    SEQREWARD_READ(total_frames);
    SEQREWARD_READ(update_every);
    SEQREWARD_READ(epochs);
    SEQREWARD_READ(minibatch_size);
    SEQREWARD_READ(clip);
    SEQREWARD_READ(gamma);
    SEQREWARD_READ(gae_lambda);
    SEQREWARD_READ(value_loss_coef);
    SEQREWARD_READ(entropy_coef);
    SEQREWARD_READ(exploration_epsilon);
    SEQREWARD_READ(learning_rate);
    SEQREWARD_READ(value_learning_rate);
    SEQREWARD_READ(bc_max_epochs);
    SEQREWARD_READ(bc_patience);
    SEQREWARD_READ(bc_batch_size);
    SEQREWARD_READ(bc_learning_rate);
    SEQREWARD_READ(bc_validation_fraction);
    SEQREWARD_READ(eval_every);
    SEQREWARD_READ(eval_dialogs);
    SEQREWARD_READ(eval_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad ppo config: ") + e.what());
  }
  if (c.hidden < 1 || c.total_frames < 0 || c.update_every < 1 ||
      c.epochs < 1 || c.minibatch_size < 1 || c.clip < 0.0 ||
      c.exploration_epsilon < 0.0 || c.exploration_epsilon > 1.0 ||
      c.eval_every < 1 || c.eval_dialogs < 1 || c.bc_patience < 1 ||
      c.bc_validation_fraction <= 0.0 || c.bc_validation_fraction >= 1.0) {
    throw ConfigError("ppo config out of range");
  }
  return c;
}

#undef SEQREWARD_JSON_FIELD
#undef SEQREWARD_READ

// ---------------------------------------------------------------------------
// DQN.

QAgent::QAgent(int state_dim, int action_dim, const DqnConfig& config,
               Rng& rng)
    : config_(config),
      q_("q", {state_dim, config.hidden, action_dim},
         {nn::Activation::kRelu, nn::Activation::kIdentity}, rng),
      target_(q_),
      opt_(q_.Parameters(), nn::AdamConfig{.learning_rate = config.learning_rate}),
      buffer_(config.buffer_capacity, state_dim) {}

Matrix QAgent::QValues(const Matrix& states) const { return q_.Forward(states); }

int QAgent::Greedy(const DialogState& state) const {
  const Matrix q = q_.Forward(Matrix(state.ToVector().transpose()));
  return ArgMaxRow(q, 0);
}

BatchPolicy QAgent::GreedyPolicy() const {
  return [this](const Matrix& states, std::vector<int>* actions) {
    const Matrix q = q_.Forward(states);
    for (Eigen::Index r = 0; r < q.rows(); ++r) (*actions)[r] = ArgMaxRow(q, r);
  };
}

double QAgent::TrainStep(Rng& rng, bool use_margin) {
  return Update(buffer_.Sample(config_.batch_size, rng), use_margin);
}

double QAgent::Update(const ReplayBatch& batch, bool use_margin) {
  const Eigen::Index n = batch.states.rows();
  nn::NetCache cache;
  const Matrix q = q_.Forward(batch.states, &cache);
  const Matrix q_next = target_.Forward(batch.next_states);
  Matrix grad = Matrix::Zero(q.rows(), q.cols());
  double loss = 0.0;
  const double delta = config_.huber_delta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = batch.actions[i];
    const double target =
        batch.rewards(i) +
        config_.gamma * (1.0 - batch.done(i)) * q_next.row(i).maxCoeff();
    const double td = q(i, a) - target;
    const double abs_td = std::abs(td);
    loss += abs_td <= delta ? 0.5 * td * td : delta * (abs_td - 0.5 * delta);
    grad(i, a) += std::clamp(td, -delta, delta) / static_cast<double>(n);
    if (use_margin && batch.expert[i]) {
      int best = 0;
      double best_value = -std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < q.cols(); ++k) {
        const double v = q(i, k) + (k == a ? 0.0 : config_.margin);
        if (v > best_value) {
          best_value = v;
          best = static_cast<int>(k);
        }
      }
      loss += config_.margin_weight * (best_value - q(i, a));
      const double w = config_.margin_weight / static_cast<double>(n);
      grad(i, best) += w;
      grad(i, a) -= w;
    }
  }
  loss /= static_cast<double>(n);
  nn::CheckFinite(loss, "q loss");
  q_.ZeroGrad();
  q_.Backward(cache, grad);
  opt_.Step();
  return loss;
}

Checkpoint QAgent::ToCheckpoint() const {
  Checkpoint ckpt;
  ckpt.metadata() = {{"kind", "q_agent"}, {"config", config_.ToJson()}};
  q_.ExportTo(ckpt);
  return ckpt;
}

namespace {

// Shared epsilon-greedy loop for DQN and the post-warm-up phase of WDQN.
TrainOutput RunValueLearning(const Ontology& ontology,
                             const EnvConfig& env_config,
                             const RewardEstimator* est,
                             const DqnConfig& config, std::uint64_t seed,
                             QAgent& agent, bool use_margin) {
  TrainOutput out;
  DialogEnv env(ontology, env_config);
  Evaluator evaluator(ontology, env_config);
  std::optional<CachedScorer> scorer;
  if (est) scorer.emplace(est);
  Rng explore(DeriveSeed(seed, 11));
  Rng sample(DeriveSeed(seed, 12));
  const std::uint64_t goal_stream = DeriveSeed(seed, 13);
  const int action_dim = ontology.action_dim();

  auto evaluate = [&](std::int64_t frame) {
    const EvalResult r = evaluator.Run(agent.GreedyPolicy(),
                                       config.eval_dialogs, config.eval_seed);
    out.curve.points.push_back(
        {frame, r.success_rate, r.reward_score, r.avg_turn, seed});
  };

  evaluate(0);
  DialogState s = env.Reset(DeriveSeed(goal_stream, 0));
  for (std::int64_t frame = 1; frame <= config.total_frames; ++frame) {
    const double eps = EpsilonAt(frame - 1, config.epsilon_start,
                                 config.epsilon_end,
                                 config.epsilon_decay_frames);
    int a;
    if (Uniform01(explore) < eps) {
      a = UniformInt(explore, 0, action_dim - 1);
    } else {
      a = agent.Greedy(s);
    }
    const StepResult step = env.Step(DialogAction{a});
    const double r =
        scorer ? scorer->Shape(step.r_ori, s, DialogAction{a}) : step.r_ori;
    agent.buffer().Add(s, a, r, step.state, step.done);
    if (step.done) {
      ++out.episodes;
      s = env.Reset(DeriveSeed(goal_stream, static_cast<std::uint64_t>(out.episodes)));
    } else {
      s = step.state;
    }
    if (frame % config.train_every == 0 &&
        agent.buffer().size() >= config.batch_size) {
      for (int k = 0; k < config.batches_per_train; ++k) {
        agent.TrainStep(sample, use_margin);
      }
    }
    if (frame % config.target_sync_frames == 0) agent.SyncTarget();
    if (frame % config.eval_every == 0) evaluate(frame);
  }
  out.frames = config.total_frames;
  return out;
}

}  // namespace

TrainOutput DqnTrain(const Ontology& ontology, const EnvConfig& env_config,
                     const RewardEstimator* est, const DqnConfig& config,
                     std::uint64_t seed) {
  if (est && est->ontology_hash() != ontology.Hash()) {
    throw ConfigError("estimator ontology does not match the environment");
  }
  Rng init(DeriveSeed(seed, 10));
  auto agent = std::make_unique<QAgent>(ontology.state_dim(),
                                        ontology.action_dim(), config, init);
  TrainOutput out =
      RunValueLearning(ontology, env_config, est, config, seed, *agent, false);
  out.agent = std::move(agent);
  return out;
}

std::vector<Transition> ExpertTransitions(const Ontology& ontology,
                                          const ExpertCorpus& corpus,
                                          const EnvConfig& env_config) {
  if (!corpus.ontology_hash.empty() && corpus.ontology_hash != ontology.Hash()) {
    throw ConfigError("corpus was generated for another ontology");
  }
  DialogEnv env(ontology, env_config);
  std::vector<Transition> out;
  out.reserve(corpus.size());
  for (int i = 0; i < corpus.n_dialogs; ++i) {
    DialogState s =
        env.Reset(DeriveSeed(corpus.seed, static_cast<std::uint64_t>(i)));
    while (!env.done()) {
      const DialogAction a = ExpertAction(env.layout(), env.assignment(), s);
      const std::size_t k = out.size();
      if (k >= corpus.states.size() || corpus.states[k] != s ||
          corpus.actions[k].index != a.index) {
        throw ConfigError("corpus does not match an expert replay at pair " +
                          std::to_string(k));
      }
      const StepResult step = env.Step(a);
      Transition t;
      t.state = s;
      t.action = a;
      t.r_ori = step.r_ori;
      t.r_shaped = step.r_ori;
      t.next_state = step.state;
      t.done = step.done;
      t.success = step.success;
      out.push_back(std::move(t));
      s = step.state;
    }
  }
  if (out.size() != corpus.states.size()) {
    throw ConfigError("corpus has extra pairs beyond its dialogs");
  }
  return out;
}

TrainOutput WdqnTrain(const Ontology& ontology, const EnvConfig& env_config,
                      const RewardEstimator* est, const ExpertCorpus& corpus,
                      const DqnConfig& config, std::uint64_t seed) {
  if (est && est->ontology_hash() != ontology.Hash()) {
    throw ConfigError("estimator ontology does not match the environment");
  }
  Rng init(DeriveSeed(seed, 10));
  auto owned = std::make_unique<QAgent>(ontology.state_dim(),
                                        ontology.action_dim(), config, init);
  QAgent& agent = *owned;
  std::optional<CachedScorer> scorer;
  if (est) scorer.emplace(est);
  for (const Transition& t : ExpertTransitions(ontology, corpus, env_config)) {
    const double r = scorer ? scorer->Shape(t.r_ori, t.state, t.action) : t.r_ori;
    agent.buffer().Add(t.state, t.action.index, r, t.next_state, t.done, true);
  }
  Rng warm(DeriveSeed(seed, 14));
  for (int k = 0; k < config.warm_start_updates; ++k) {
    agent.TrainStep(warm, true);
    if ((k + 1) % config.target_sync_frames == 0) agent.SyncTarget();
  }
  agent.SyncTarget();
  TrainOutput out =
      RunValueLearning(ontology, env_config, est, config, seed, agent, true);
  out.agent = std::move(owned);
  return out;
}

// ---------------------------------------------------------------------------
// PPO.

void ComputeGae(const std::vector<double>& rewards,
                const std::vector<double>& values,
                const std::vector<char>& dones, double gamma, double lambda,
                std::vector<double>* advantages, std::vector<double>* returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw ContractViolation("gae: inconsistent segment lengths");
  }
  advantages->assign(n, 0.0);
  returns->assign(n, 0.0);
  double gae = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double not_done = dones[k] ? 0.0 : 1.0;
    const double delta =
        rewards[k] + gamma * not_done * values[k + 1] - values[k];
    gae = delta + gamma * lambda * not_done * gae;
    (*advantages)[k] = gae;
    (*returns)[k] = gae + values[k];
  }
}

PpoAgent::PpoAgent(int state_dim, int action_dim, const PpoConfig& config,
                   Rng& rng)
    : config_(config),
      policy_("pi", {state_dim, config.hidden, action_dim},
              {nn::Activation::kRelu, nn::Activation::kIdentity}, rng),
      value_("v", {state_dim, config.hidden, 1},
             {nn::Activation::kRelu, nn::Activation::kIdentity}, rng),
      policy_opt_(policy_.Parameters(),
                  nn::AdamConfig{.learning_rate = config.learning_rate}),
      value_opt_(value_.Parameters(),
                 nn::AdamConfig{.learning_rate = config.value_learning_rate}) {}

Matrix PpoAgent::Probabilities(const Matrix& states) const {
  return nn::SoftmaxRows(policy_.Forward(states));
}

Vector PpoAgent::BehaviorProbabilities(const DialogState& state) const {
  const Matrix p = Probabilities(Matrix(state.ToVector().transpose()));
  const double eps = config_.exploration_epsilon;
  return ((1.0 - eps) * p.row(0).transpose().array() +
          eps / static_cast<double>(p.cols()))
      .matrix();
}

BatchPolicy PpoAgent::GreedyPolicy() const {
  return [this](const Matrix& states, std::vector<int>* actions) {
    const Matrix logits = policy_.Forward(states);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      (*actions)[r] = ArgMaxRow(logits, r);
    }
  };
}

double PpoAgent::Imitate(const ExpertCorpus& corpus, Rng& rng) {
  if (corpus.size() < 2) throw InvalidInputError("imitation corpus is empty");
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_val = std::max(1, static_cast<int>(std::lround(
                                    config_.bc_validation_fraction * corpus.size())));
  const std::vector<int> val(order.begin(), order.begin() + n_val);
  std::vector<int> train(order.begin() + n_val, order.end());

  auto stack = [&](const std::vector<int>& idx, std::size_t b, std::size_t e,
                   std::vector<int>* labels) {
    Matrix x(static_cast<Eigen::Index>(e - b), corpus.states[0].size());
    labels->clear();
    for (std::size_t r = b; r < e; ++r) {
      CopyBits(corpus.states[idx[r]], x, static_cast<Eigen::Index>(r - b));
      labels->push_back(corpus.actions[idx[r]].index);
    }
    return x;
  };
  std::vector<int> y_val;
  const Matrix x_val = stack(val, 0, val.size(), &y_val);
  auto accuracy = [&]() {
    const Matrix logits = policy_.Forward(x_val);
    int correct = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      if (ArgMaxRow(logits, r) == y_val[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
  };

  nn::Adam opt(policy_.Parameters(),
               nn::AdamConfig{.learning_rate = config_.bc_learning_rate});
  double best = accuracy();
  nn::DenseNet best_net = policy_;
  int since = 0;
  std::vector<int> y;
  for (int epoch = 0; epoch < config_.bc_max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t b = 0; b < train.size();
         b += static_cast<std::size_t>(config_.bc_batch_size)) {
      const std::size_t e = std::min(
          train.size(), b + static_cast<std::size_t>(config_.bc_batch_size));
      const Matrix x = stack(train, b, e, &y);
      nn::NetCache cache;
      const Matrix logits = policy_.Forward(x, &cache);
      const nn::LossResult ce = nn::SoftmaxCrossEntropy(logits, y);
      nn::CheckFinite(ce.value, "imitation loss");
      policy_.ZeroGrad();
      policy_.Backward(cache, ce.grad);
      opt.Step();
    }
    const double acc = accuracy();
    if (acc > best) {
      best = acc;
      best_net = policy_;
      since = 0;
    } else if (++since >= config_.bc_patience) {
      break;
    }
  }
  // Element-wise copy keeps the parameter addresses the optimizers hold.
  policy_ = best_net;
  return best;
}

PpoAgent::UpdateStats PpoAgent::Update(const Rollout& rollout, Rng& rng) {
  const Eigen::Index n = rollout.states.rows();
  if (n == 0) return {};
  const double eps = config_.exploration_epsilon;
  const double a_dim = static_cast<double>(policy_.output_size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  UpdateStats stats;
  int batches = 0;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index b = 0; b < n; b += config_.minibatch_size) {
      const Eigen::Index e = std::min<Eigen::Index>(n, b + config_.minibatch_size);
      const Eigen::Index m = e - b;
      Matrix x(m, rollout.states.cols());
      for (Eigen::Index r = 0; r < m; ++r) x.row(r) = rollout.states.row(order[b + r]);

      nn::NetCache pcache, vcache;
      const Matrix logits = policy_.Forward(x, &pcache);
      const Matrix probs = nn::SoftmaxRows(logits);
      const Matrix v = value_.Forward(x, &vcache);
      Matrix g_logits = Matrix::Zero(m, logits.cols());
      Matrix g_v(m, 1);
      double ploss = 0.0, vloss = 0.0, entropy = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) {
        const int k = order[b + r];
        const int a = rollout.actions[k];
        const double adv = rollout.advantages(k);
        const double p_mix = (1.0 - eps) * probs(r, a) + eps / a_dim;
        const double ratio = std::exp(std::log(p_mix) - rollout.old_log_probs(k));
        const double clipped =
            std::clamp(ratio, 1.0 - config_.clip, 1.0 + config_.clip);
        ploss -= std::min(ratio * adv, clipped * adv);
        // Old log-probabilities come from differently shaped forward passes,
        // so a ratio that should be exactly 1 can be off by rounding; treat
        // such ratios as sitting on the clip boundary.
        constexpr double kRatioTol = 1e-9;
        const bool frozen =
            (adv > 0.0 && ratio >= 1.0 + config_.clip - kRatioTol) ||
            (adv < 0.0 && ratio <= 1.0 - config_.clip + kRatioTol);
        if (!frozen && adv != 0.0) {
          // d(-ratio*adv)/dlogits through the epsilon mixture.
          const double coef = -adv * ratio * (1.0 - eps) * probs(r, a) / p_mix;
          for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            g_logits(r, j) += coef * ((j == a ? 1.0 : 0.0) - probs(r, j)) /
                              static_cast<double>(m);
          }
        }
        double h = 0.0;
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
          const double p = probs(r, j);
          if (p > 0.0) h -= p * std::log(p);
        }
        entropy += h;
        if (config_.entropy_coef > 0.0) {
          for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            const double p = probs(r, j);
            const double lp = p > 0.0 ? std::log(p) : 0.0;
            g_logits(r, j) += config_.entropy_coef * p * (lp + h) /
                              static_cast<double>(m);
          }
        }
        const double dv = v(r, 0) - rollout.returns(k);
        vloss += dv * dv;
        g_v(r, 0) = 2.0 * config_.value_loss_coef * dv / static_cast<double>(m);
      }
      ploss /= static_cast<double>(m);
      vloss /= static_cast<double>(m);
      entropy /= static_cast<double>(m);
      nn::CheckFinite(ploss, "ppo policy loss");
      nn::CheckFinite(vloss, "ppo value loss");
      nn::CheckFinite(entropy, "ppo policy entropy");
      if (entropy < 1e-12) throw TrainingError("ppo policy entropy collapsed");
      policy_.ZeroGrad();
      policy_.Backward(pcache, g_logits);
      policy_opt_.Step();
      value_.ZeroGrad();
      value_.Backward(vcache, g_v);
      value_opt_.Step();
      stats.policy_loss += ploss;
      stats.value_loss += vloss;
      stats.entropy += entropy;
      ++batches;
    }
  }
  stats.policy_loss /= batches;
  stats.value_loss /= batches;
  stats.entropy /= batches;
  return stats;
}

Checkpoint PpoAgent::ToCheckpoint() const {
  Checkpoint ckpt;
  ckpt.metadata() = {{"kind", "ppo_agent"}, {"config", config_.ToJson()}};
  policy_.ExportTo(ckpt);
  value_.ExportTo(ckpt);
  return ckpt;
}

PpoTrainOutput PpoTrain(const Ontology& ontology, const EnvConfig& env_config,
                        const RewardEstimator* est, const ExpertCorpus& corpus,
                        const PpoConfig& config, std::uint64_t seed) {
  if (est && est->ontology_hash() != ontology.Hash()) {
    throw ConfigError("estimator ontology does not match the environment");
  }
  Rng init(DeriveSeed(seed, 20));
  auto owned = std::make_unique<PpoAgent>(ontology.state_dim(),
                                          ontology.action_dim(), config, init);
  PpoAgent& agent = *owned;
  Rng bc_rng(DeriveSeed(seed, 21));
  PpoTrainOutput out;
  out.imitation_accuracy = agent.Imitate(corpus, bc_rng);

  Evaluator evaluator(ontology, env_config);
  auto evaluate = [&](std::int64_t frame) {
    const EvalResult r = evaluator.Run(agent.GreedyPolicy(),
                                       config.eval_dialogs, config.eval_seed);
    out.curve.points.push_back(
        {frame, r.success_rate, r.reward_score, r.avg_turn, seed});
    return r;
  };
  out.after_imitation = evaluate(0);

  DialogEnv env(ontology, env_config);
  std::optional<CachedScorer> scorer;
  if (est) scorer.emplace(est);
  Rng act_rng(DeriveSeed(seed, 22));
  Rng update_rng(DeriveSeed(seed, 23));
  const std::uint64_t goal_stream = DeriveSeed(seed, 24);
  int episodes = 0;
  DialogState s = env.Reset(DeriveSeed(goal_stream, 0));

  std::vector<DialogState> seg_states;
  std::vector<int> seg_actions;
  std::vector<double> seg_logp, seg_rewards;
  std::vector<char> seg_dones;
  for (std::int64_t frame = 1; frame <= config.total_frames; ++frame) {
    const Vector p = agent.BehaviorProbabilities(s);
    double u = Uniform01(act_rng);
    int a = static_cast<int>(p.size()) - 1;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      u -= p(k);
      if (u < 0.0) {
        a = static_cast<int>(k);
        break;
      }
    }
    const StepResult step = env.Step(DialogAction{a});
    const double r =
        scorer ? scorer->Shape(step.r_ori, s, DialogAction{a}) : step.r_ori;
    seg_states.push_back(s);
    seg_actions.push_back(a);
    seg_logp.push_back(std::log(p(a)));
    seg_rewards.push_back(r);
    seg_dones.push_back(step.done ? 1 : 0);
    if (step.done) {
      ++episodes;
      s = env.Reset(DeriveSeed(goal_stream, static_cast<std::uint64_t>(episodes)));
    } else {
      s = step.state;
    }

    if (frame % config.update_every == 0) {
      std::vector<DialogState> with_next = seg_states;
      with_next.push_back(s);
      const Matrix v = agent.value().Forward(StackStates(with_next));
      std::vector<double> values(v.data(), v.data() + v.rows());
      std::vector<double> adv, ret;
      ComputeGae(seg_rewards, values, seg_dones, config.gamma,
                 config.gae_lambda, &adv, &ret);
      PpoAgent::Rollout ro;
      ro.states = StackStates(seg_states);
      ro.actions = seg_actions;
      ro.old_log_probs = Eigen::Map<const Vector>(seg_logp.data(),
                                                  static_cast<Eigen::Index>(seg_logp.size()));
      Vector a_vec = Eigen::Map<const Vector>(adv.data(),
                                              static_cast<Eigen::Index>(adv.size()));
      const double mean = a_vec.mean();
      const double sd = std::sqrt((a_vec.array() - mean).square().mean());
      ro.advantages = (a_vec.array() - mean) / (sd + 1e-8);
      ro.returns = Eigen::Map<const Vector>(ret.data(),
                                            static_cast<Eigen::Index>(ret.size()));
      agent.Update(ro, update_rng);
      seg_states.clear();
      seg_actions.clear();
      seg_logp.clear();
      seg_rewards.clear();
      seg_dones.clear();
    }
    if (frame % config.eval_every == 0) evaluate(frame);
  }
  out.agent = std::move(owned);
  return out;
}

}  // namespace seqreward
