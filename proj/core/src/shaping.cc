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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "seqreward/errors.h"
#include "seqreward/hash.h"

namespace seqreward {

using nn::Matrix;

std::string CombinationName(Combination c) {
  return c == Combination::kSeqPrd ? "SeqPrd" : "SeqAvg";
}

Combination ParseCombination(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "seqprd") return Combination::kSeqPrd;
  if (lower == "seqavg") return Combination::kSeqAvg;
  throw ConfigError("unknown combination '" + name +
                    "' (expected SeqPrd or SeqAvg)");
}

LevelScores GatedRewards(const LevelScores& y, double tau, double b) {
  LevelScores r;
  r[kDomain] = y[kDomain];
  r[kAct] = y[kAct] * nn::Sigmoid(tau * (r[kDomain] + b));
  r[kSlot] = y[kSlot] * nn::Sigmoid(tau * (r[kAct] + b));
  return r;
}

double Combine(Combination c, const LevelScores& gated) {
  if (c == Combination::kSeqPrd) return gated[kSlot];
  return (gated[kDomain] + gated[kAct] + gated[kSlot]) / 3.0;
}

nlohmann::json ShapingParams::ToJson() const {
  return {{"tau", tau},
          {"b", b},
          {"alpha", alpha},
          {"combination", CombinationName(combination)}};
}

ShapingParams ShapingParams::FromJson(const nlohmann::json& j) {
  return FromJson(j, ShapingParams{});
}

ShapingParams ShapingParams::FromJson(const nlohmann::json& j,
                                      const ShapingParams& defaults) {
  ShapingParams p = defaults;
  try {
    p.tau = j.value("tau", p.tau);
    p.b = j.value("b", p.b);
    p.alpha = j.value("alpha", p.alpha);
    if (j.contains("combination")) {
      p.combination = ParseCombination(j.at("combination").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad shaping params: ") + e.what());
  }
  p.Validate();
  return p;
}

void ShapingParams::Validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  if (!std::isfinite(b)) throw ConfigError("b must be finite");
}

RewardEstimator::RewardEstimator(const Ontology& ontology, DaeModel dae,
                                 DiscriminatorSet disc, ShapingParams params)
    : dae_(std::move(dae)),
      disc_(std::move(disc)),
      m_(BuildAssignmentMatrix(ontology)),
      params_(params),
      ontology_hash_(ontology.Hash()) {
  params_.Validate();
  if (dae_.ontology_hash() != ontology_hash_) {
    throw ConfigError("dae ontology hash " + dae_.ontology_hash() +
                      " does not match " + ontology_hash_);
  }
  if (disc_.latent_dim() != dae_.latent_dim()) {
    throw ConfigError("discriminator width does not match the dae");
  }
}

Matrix RewardEstimator::ScoreLevels(const Matrix& states,
                                    const std::vector<int>& actions) const {
  if (states.rows() != static_cast<Eigen::Index>(actions.size())) {
    throw ContractViolation("one action per state is required");
  }
  Matrix full = Matrix::Zero(states.rows(), m_.action_dim());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] < 0 || actions[i] >= m_.action_dim()) {
      throw InvalidInputError("action index out of range");
    }
    full(static_cast<Eigen::Index>(i), actions[i]) = 1.0;
  }
  const DaeLatents lat = dae_.Encode(states, nullptr, false);
  Matrix out(states.rows(), kNumLevels);
  out.col(kDomain) =
      disc_.Score(kDomain, lat.blocks[kDomain], full * m_.DomainProjection());
  out.col(kAct) = disc_.Score(kAct, lat.blocks[kAct], full * m_.ActProjection());
  out.col(kSlot) =
      disc_.Score(kSlot, lat.blocks[kSlot], full * m_.SlotProjection());
  return out;
}

LevelScores RewardEstimator::ScoreLevels(const DialogState& state,
                                         DialogAction action) const {
  const Matrix y =
      ScoreLevels(Matrix(state.ToVector().transpose()), {action.index});
  return {y(0, 0), y(0, 1), y(0, 2)};
}

double RewardEstimator::Combined(const LevelScores& y) const {
  return Combine(params_.combination, GatedRewards(y, params_.tau, params_.b));
}

double RewardEstimator::Combined(const DialogState& state,
                                 DialogAction action) const {
  return Combined(ScoreLevels(state, action));
}

double RewardEstimator::Shape(double r_ori, const DialogState& state,
                              DialogAction action) const {
  if (params_.alpha == 0.0) return r_ori;
  return r_ori + params_.alpha * Combined(state, action);
}

nlohmann::json RewardEstimator::Manifest(const Ontology& ontology,
                                         const std::filesystem::path& dae_path,
                                         const std::filesystem::path& disc_path,
                                         const ShapingParams& params) {
  return {{"kind", "reward_estimator"},
          {"ontology_hash", ontology.Hash()},
          {"dae", dae_path.generic_string()},
          {"dae_file_hash", Sha256File(dae_path)},
          {"discriminators", disc_path.generic_string()},
          {"discriminators_file_hash", Sha256File(disc_path)},
          {"shaping", params.ToJson()}};
}

namespace {

std::filesystem::path Resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

nlohmann::json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed json in " + path.string() + ": " + e.what());
  }
}

}  // namespace

RewardEstimator RewardEstimator::Load(
    const std::filesystem::path& manifest_path, const Ontology& ontology) {
  const nlohmann::json j = ReadJsonFile(manifest_path);
  return Load(manifest_path, ontology,
              ShapingParams::FromJson(j.value("shaping", nlohmann::json::object())));
}

RewardEstimator RewardEstimator::Load(
    const std::filesystem::path& manifest_path, const Ontology& ontology,
    const ShapingParams& overrides) {
  const nlohmann::json j = ReadJsonFile(manifest_path);
  if (j.value("kind", "") != "reward_estimator") {
    throw ConfigError(manifest_path.string() + " is not an estimator manifest");
  }
  if (j.value("ontology_hash", "") != ontology.Hash()) {
    throw ConfigError("estimator was built for ontology " +
                      j.value("ontology_hash", std::string("?")));
  }
  const auto base = manifest_path.parent_path();
  const auto dae_path = Resolve(base, j.at("dae").get<std::string>());
  const auto disc_path = Resolve(base, j.at("discriminators").get<std::string>());
  if (Sha256File(dae_path) != j.value("dae_file_hash", "")) {
    throw ConfigError("dae checkpoint " + dae_path.string() +
                      " does not match its recorded hash");
  }
  if (Sha256File(disc_path) != j.value("discriminators_file_hash", "")) {
    throw ConfigError("discriminator checkpoint " + disc_path.string() +
                      " does not match its recorded hash");
  }
  DaeModel dae = DaeModel::Load(dae_path, ontology);
  DiscriminatorSet disc =
      LoadDiscriminators(Checkpoint::Load(disc_path), ontology, dae);
  return RewardEstimator(ontology, std::move(dae), std::move(disc), overrides);
}

const LevelScores& CachedScorer::Scores(const DialogState& state,
                                        DialogAction action) {
  std::string key = state.ToString();
  key.push_back(':');
  key += std::to_string(action.index);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    it = cache_.emplace(std::move(key), est_->ScoreLevels(state, action)).first;
  }
  return it->second;
}

double CachedScorer::Shape(double r_ori, const DialogState& state,
                           DialogAction action) {
  const double alpha = est_->params().alpha;
  if (alpha == 0.0) return r_ori;
  return r_ori + alpha * est_->Combined(Scores(state, action));
}

}  // namespace seqreward
