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

#ifndef SEQREWARD_SHAPING_H_
#define SEQREWARD_SHAPING_H_

#include <array>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqreward/advreward.h"
#include "seqreward/dae.h"
#include "seqreward/ontology.h"

namespace seqreward {

enum class Combination { kSeqPrd, kSeqAvg };
std::string CombinationName(Combination c);
// Accepts "SeqPrd" / "SeqAvg" (case-insensitive); throws ConfigError.
Combination ParseCombination(const std::string& name);

using LevelScores = std::array<double, kNumLevels>;

// R_d = y_d; R_a = y_a * sigmoid(tau (R_d + b)); R_s = y_s * sigmoid(tau (R_a + b)).
LevelScores GatedRewards(const LevelScores& y, double tau, double b);

// SeqPrd keeps R_s, SeqAvg averages the three gated rewards.
double Combine(Combination c, const LevelScores& gated);

struct ShapingParams {
  double tau = 10.0;
  double b = -0.5;
  double alpha = 5.0;
  Combination combination = Combination::kSeqPrd;

  nlohmann::json ToJson() const;
  // Missing keys keep their defaults; throws ConfigError when tau <= 0 or
  // alpha < 0.
  static ShapingParams FromJson(const nlohmann::json& j);
  static ShapingParams FromJson(const nlohmann::json& j,
                                const ShapingParams& defaults);
  void Validate() const;
};

// Frozen DAE plus discriminators turned into a per-turn reward.
class RewardEstimator {
 public:
  RewardEstimator(const Ontology& ontology, DaeModel dae,
                  DiscriminatorSet disc, ShapingParams params);

  const ShapingParams& params() const { return params_; }
  const AssignmentMatrix& assignment() const { return m_; }
  const std::string& ontology_hash() const { return ontology_hash_; }

  // Deterministic (mean-latent) discriminator scores, each in (0, 1).
  LevelScores ScoreLevels(const DialogState& state,
                          DialogAction action) const;
  // Batched form; returns n x 3.
  nn::Matrix ScoreLevels(const nn::Matrix& states,
                         const std::vector<int>& actions) const;

  double Combined(const LevelScores& y) const;
  double Combined(const DialogState& state, DialogAction action) const;

  // r_ori + alpha * combined score.
  double Shape(double r_ori, const DialogState& state,
               DialogAction action) const;

  // Manifest referencing the checkpoint files by path and content hash.
  static nlohmann::json Manifest(const Ontology& ontology,
                                 const std::filesystem::path& dae_path,
                                 const std::filesystem::path& disc_path,
                                 const ShapingParams& params);
  // Verifies ontology, DAE and discriminator hashes; throws ConfigError.
  // Relative checkpoint paths resolve against the manifest's directory.
  static RewardEstimator Load(const std::filesystem::path& manifest_path,
                              const Ontology& ontology);
  static RewardEstimator Load(const std::filesystem::path& manifest_path,
                              const Ontology& ontology,
                              const ShapingParams& overrides);

 private:
  DaeModel dae_;
  DiscriminatorSet disc_;
  AssignmentMatrix m_;
  ShapingParams params_;
  std::string ontology_hash_;
};

// Memoizes level scores per (state, action) for one rollout worker. Not
// thread-safe; each worker owns its own cache.
class CachedScorer {
 public:
  explicit CachedScorer(const RewardEstimator* est) : est_(est) {}

  const LevelScores& Scores(const DialogState& state, DialogAction action);
  double Shape(double r_ori, const DialogState& state, DialogAction action);
  std::size_t size() const { return cache_.size(); }

 private:
  const RewardEstimator* est_;
  std::unordered_map<std::string, LevelScores> cache_;
};

}  // namespace seqreward

#endif  // SEQREWARD_SHAPING_H_
