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

#ifndef SEQREWARD_ADVREWARD_H_
#define SEQREWARD_ADVREWARD_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqreward/checkpoint.h"
#include "seqreward/dae.h"
#include "seqreward/neural.h"
#include "seqreward/ontology.h"

namespace seqreward {

struct GanConfig {
  int z_dim = 32;
  int hidden = 64;
  double gumbel_temperature = 1.0;
  int batch_size = 64;
  int generator_steps_per_disc_step = 5;
  int max_generator_steps_per_stage = 60000;
  int min_disc_steps_per_stage = 12000;
  int check_every = 20;  // discriminator steps between probe checks
  int stable_checks = 10;
  double probe_low = 0.55;
  double probe_high = 0.95;
  int probe_size = 512;
  double generator_l2 = 1e-4;
  double generator_lr = 1e-4;
  // Per-level multiplier on generator_lr for the level generators; the
  // shared action generator uses generator_lr itself.
  std::array<double, kNumLevels> generator_lr_scale = {1.0, 1.0, 1.0};
  double discriminator_lr = 1e-3;
  double holdout_fraction = 0.1;

  nlohmann::json ToJson() const;
  static GanConfig FromJson(const nlohmann::json& j);
};

// Per-level sub-states and sub-actions; one row per sample.
struct SubBatch {
  std::array<nn::Matrix, kNumLevels> states;
  std::array<nn::Matrix, kNumLevels> actions;
  nn::Matrix full_actions;  // one-hot over the action space
  int size() const { return static_cast<int>(states[0].rows()); }
};

// Every random input of one generator draw. All four generators read the
// same z.
struct GeneratorNoise {
  nn::Matrix z;
  std::array<nn::Matrix, kNumLevels> eps;
  nn::Matrix gumbel;
  static GeneratorNoise Draw(int n, int z_dim, int latent_dim, int action_dim,
                             Rng& rng);
};

class GeneratorSet {
 public:
  struct Trace {
    std::array<nn::NetCache, kNumLevels> body;
    std::array<nn::NetCache, kNumLevels> mean;
    std::array<nn::NetCache, kNumLevels> log_var;
    std::array<nn::Matrix, kNumLevels> raw_log_var;
    std::array<nn::Reparameterized, kNumLevels> rep;
    nn::NetCache act;
    nn::GumbelSample gumbel;
  };

  GeneratorSet() = default;
  GeneratorSet(int z_dim, int latent_dim, int hidden, int action_dim,
               Rng& rng);

  int z_dim() const { return act_.input_size(); }
  int latent_dim() const { return mean_[0].output_size(); }
  int action_dim() const { return act_.output_size(); }

  // soft_actions replaces the straight-through one-hot by the Gumbel
  // softmax relaxation; it exists for gradient checking.
  SubBatch Generate(const GeneratorNoise& noise, const AssignmentMatrix& m,
                    double temperature, Trace* trace = nullptr,
                    bool soft_actions = false) const;

  // Accumulates gradients of all live level generators and of the shared
  // action generator from gradients on the generated batch.
  void Backward(const Trace& trace, const AssignmentMatrix& m,
                const SubBatch& grads, const std::vector<int>& live);

  std::vector<nn::Parameter*> LevelParameters(int level);
  std::vector<nn::Parameter*> ActionParameters();
  std::vector<nn::Parameter*> Parameters();
  double WeightSquaredNorm(const std::vector<int>& levels) const;
  void ZeroGrad();

  void ExportTo(Checkpoint& ckpt) const;
  void ImportFrom(const Checkpoint& ckpt);
  bool operator==(const GeneratorSet& o) const;

 private:
  std::array<nn::DenseNet, kNumLevels> body_;
  std::array<nn::DenseNet, kNumLevels> mean_;
  std::array<nn::DenseNet, kNumLevels> log_var_;
  nn::DenseNet act_;
};

// Draws noise and generates n fake sub state-action pairs.
SubBatch GenerateFake(const GeneratorSet& gen, int n,
                      const AssignmentMatrix& m, double temperature, Rng& rng);

class DiscriminatorSet {
 public:
  DiscriminatorSet() = default;
  DiscriminatorSet(int latent_dim, std::array<int, kNumLevels> level_sizes,
                   int hidden, Rng& rng);

  int latent_dim() const { return latent_dim_; }

  // Raw sigmoid output, n x 1.
  nn::Matrix Forward(int level, const nn::Matrix& states,
                     const nn::Matrix& actions,
                     nn::NetCache* cache = nullptr) const;
  // Forward clamped to [kProbEpsilon, 1 - kProbEpsilon], so scores are
  // strictly inside (0, 1).
  nn::Matrix Score(int level, const nn::Matrix& states,
                   const nn::Matrix& actions) const;
  // Returns the gradient with respect to the concatenated input.
  nn::Matrix Backward(int level, const nn::NetCache& cache,
                      const nn::Matrix& grad_out);

  std::vector<nn::Parameter*> LevelParameters(int level);
  void ZeroGrad();

  void ExportTo(Checkpoint& ckpt) const;
  void ImportFrom(const Checkpoint& ckpt);
  bool operator==(const DiscriminatorSet& o) const;

 private:
  int latent_dim_ = 0;
  std::array<nn::DenseNet, kNumLevels> nets_;
};

// Ordered stages; each names the levels whose generator and discriminator
// receive updates.
struct PairSchedule {
  std::vector<std::vector<int>> stages;
  // {domain} -> {domain, act} -> {domain, act, slot}.
  static PairSchedule Cumulative();
};

// Encodes randomly chosen corpus rows with sampled latents and decomposes
// the paired actions.
SubBatch SampleReal(const DaeModel& dae, const ExpertCorpus& corpus,
                    const AssignmentMatrix& m, int batch, Rng& rng);
SubBatch SampleRealFrom(const DaeModel& dae, const ExpertCorpus& corpus,
                        const AssignmentMatrix& m,
                        const std::vector<int>& rows, Rng& rng);

// -[mean log D(real) + mean log(1 - D(fake))] per level. Values are reported
// for every level; gradients accumulate for live levels only.
std::array<double, kNumLevels> DiscriminatorLoss(
    DiscriminatorSet& disc, const SubBatch& real, const SubBatch& fake,
    const std::vector<int>& live, bool accumulate_grads);

// Sum over live levels of mean log(1 - D(G(z))) plus l2 times the squared
// weights of the live level generators and the action generator.
// Accumulates generator gradients when requested; discriminator gradients
// are left zeroed.
double GeneratorLoss(GeneratorSet& gen, const GeneratorSet::Trace& trace,
                     const SubBatch& fake, DiscriminatorSet& disc,
                     const AssignmentMatrix& m, const std::vector<int>& live,
                     double l2, bool accumulate_grads);

struct ProbeCheck {
  int stage = 0;
  std::int64_t disc_steps = 0;
  double accuracy = 0.0;
};

struct StageReport {
  std::vector<int> live;
  std::int64_t generator_steps = 0;
  std::int64_t discriminator_steps = 0;
  double final_probe_accuracy = 0.0;
  bool converged = false;
};

struct AdversarialResult {
  GeneratorSet generators;
  DiscriminatorSet discriminators;
  std::vector<StageReport> stages;
  std::vector<ProbeCheck> probes;
};

// Called after every probe check; must not mutate training state.
using ProbeCallback = std::function<void(const ProbeCheck&,
                                         const DiscriminatorSet&)>;

// Offline training from the frozen DAE and the expert corpus only. Throws
// TrainingError naming the stage when the discriminators collapse.
AdversarialResult TrainAdversarial(
    const DaeModel& dae, const ExpertCorpus& corpus, const Ontology& ontology,
    const GanConfig& config, std::uint64_t seed,
    const PairSchedule& schedule = PairSchedule::Cumulative(),
    const ProbeCallback& on_check = {});

// Bundle with discriminators (and optionally generators) plus the hashes of
// the ontology and DAE they were trained against.
Checkpoint AdversarialCheckpoint(const AdversarialResult& result,
                                 const Ontology& ontology, const DaeModel& dae,
                                 const GanConfig& config,
                                 bool include_generators);
// Throws ConfigError on an ontology or DAE hash mismatch.
DiscriminatorSet LoadDiscriminators(const Checkpoint& ckpt,
                                    const Ontology& ontology,
                                    const DaeModel& dae);

}  // namespace seqreward

#endif  // SEQREWARD_ADVREWARD_H_
