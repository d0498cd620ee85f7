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

#ifndef SEQREWARD_DAE_H_
#define SEQREWARD_DAE_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqreward/checkpoint.h"
#include "seqreward/dialog_env.h"
#include "seqreward/neural.h"
#include "seqreward/ontology.h"

namespace seqreward {

// Level order used throughout: domain, act, slot.
enum Level { kDomain = 0, kAct = 1, kSlot = 2 };
inline constexpr int kNumLevels = 3;
const char* LevelName(int level);

struct DaeConfig {
  int latent_dim = 64;  // width of each of the three latent blocks
  int encoder_hidden = 64;
  int decoder_hidden = 128;
  int batch_size = 64;
  int max_epochs = 200;
  int early_stop_patience = 5;
  double min_improvement = 1e-4;
  double validation_fraction = 0.1;
  nn::AdamConfig adam;

  nlohmann::json ToJson() const;
  static DaeConfig FromJson(const nlohmann::json& j);
};

// Latent blocks for a batch of states (one row per state).
struct DaeLatents {
  std::array<nn::Matrix, kNumLevels> blocks;
  nn::Matrix Concat() const;
};

// Per-level class labels (argmax of each sub-action).
struct LevelLabels {
  std::array<std::vector<int>, kNumLevels> labels;
  int size() const { return static_cast<int>(labels[0].size()); }
};
LevelLabels LabelsFor(const std::vector<DialogAction>& actions,
                      const AssignmentMatrix& m);

struct DaeLossParts {
  double total = 0.0;
  double recon = 0.0;
  std::array<double, kNumLevels> cls{};
};

// Disentangled auto-encoder: three parallel encoders, one noise network
// producing the log-variance of all three blocks, a sigmoid decoder and
// three bilinear level classifiers.
class DaeModel {
 public:
  DaeModel() = default;
  DaeModel(const Ontology& ontology, const DaeConfig& config, Rng& rng);

  int state_dim() const { return state_dim_; }
  int latent_dim() const { return config_.latent_dim; }
  const DaeConfig& config() const { return config_; }
  const std::string& ontology_hash() const { return ontology_hash_; }
  std::array<int, kNumLevels> level_sizes() const { return level_sizes_; }

  // sample=false returns the encoder means; sample=true adds
  // exp(log_var / 2) * eps. rng may be null when sample is false.
  // Throws ContractViolation on a width mismatch.
  DaeLatents Encode(const nn::Matrix& states, Rng* rng, bool sample) const;
  DaeLatents Encode(const DialogState& state, Rng* rng, bool sample) const;

  // Noise log-variance (clamped) for the concatenated latent.
  nn::Matrix LogVariance(const nn::Matrix& states) const;

  // Per-bit probabilities from the concatenated latent.
  nn::Matrix Reconstruct(const nn::Matrix& latents) const;

  // Classifier logits s_i W_i for one level.
  nn::Matrix ClassifierLogits(int level, const nn::Matrix& latent) const;

  // Batch-mean loss: summed-over-bits BCE plus the three cross-entropy
  // terms. eps fixes the reparameterization noise (rows x 3*latent); when
  // null it is drawn from rng. Accumulates gradients when requested.
  DaeLossParts Loss(const nn::Matrix& states, const LevelLabels& labels,
                    Rng& rng, bool accumulate_grads = false);
  DaeLossParts LossWithNoise(const nn::Matrix& states,
                             const LevelLabels& labels, const nn::Matrix& eps,
                             bool accumulate_grads);

  void ZeroGrad();
  std::vector<nn::Parameter*> Parameters();

  Checkpoint ToCheckpoint() const;
  // SHA-256 of the serialized checkpoint; links downstream artifacts.
  std::string ContentHash() const;
  // Throws ConfigError when the checkpoint was built for another ontology.
  static DaeModel FromCheckpoint(const Checkpoint& ckpt,
                                 const Ontology& ontology);
  void Save(const std::filesystem::path& path) const;
  static DaeModel Load(const std::filesystem::path& path,
                       const Ontology& ontology);

  bool operator==(const DaeModel& o) const;

 private:
  DaeConfig config_;
  int state_dim_ = 0;
  std::array<int, kNumLevels> level_sizes_{};
  std::string ontology_hash_;
  std::array<nn::DenseNet, kNumLevels> encoders_;
  nn::DenseNet noise_;
  nn::DenseNet decoder_;
  std::array<nn::Parameter, kNumLevels> classifiers_;
};

struct DaeTrainResult {
  DaeModel model;
  std::vector<int> train_indices;
  std::vector<int> validation_indices;
  std::vector<double> train_loss;       // per epoch, including epoch 0
  std::vector<double> validation_loss;  // per epoch, including epoch 0
  int best_epoch = 0;
};

// Mini-batch training with early stopping on validation total loss.
// Epoch 0 records the losses of the untrained model. Throws TrainingError
// on a non-finite loss and InvalidInputError on an empty corpus.
DaeTrainResult TrainDae(const ExpertCorpus& corpus, const Ontology& ontology,
                        const DaeConfig& config, std::uint64_t seed);

struct DaeQuality {
  double reconstruction_bit_accuracy = 0.0;
  std::array<double, kNumLevels> classifier_accuracy{};
};

// Deterministic-mean evaluation on the given rows of the corpus.
DaeQuality EvaluateDae(const DaeModel& model, const ExpertCorpus& corpus,
                       const AssignmentMatrix& m,
                       const std::vector<int>& indices);

// Accuracy of a softmax-regression probe trained on (train_x, train_y) and
// scored on (test_x, test_y).
double LinearProbeAccuracy(const nn::Matrix& train_x,
                           const std::vector<int>& train_y,
                           const nn::Matrix& test_x,
                           const std::vector<int>& test_y, int num_classes,
                           std::uint64_t seed, int epochs = 60);

}  // namespace seqreward

#endif  // SEQREWARD_DAE_H_
