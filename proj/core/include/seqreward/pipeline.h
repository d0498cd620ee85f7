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

#ifndef SEQREWARD_PIPELINE_H_
#define SEQREWARD_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqreward/advreward.h"
#include "seqreward/agents.h"
#include "seqreward/dae.h"
#include "seqreward/dialog_env.h"
#include "seqreward/shaping.h"

namespace seqreward {

enum class AgentKind { kDqn, kWdqn, kPpo };
std::string AgentKindName(AgentKind k);
AgentKind ParseAgentKind(const std::string& name);

// "vanilla" trains on r_ori only; the others shape with the named
// combination.
enum class RewardVariant { kVanilla, kSeqAvg, kSeqPrd };
std::string RewardVariantName(RewardVariant v);
RewardVariant ParseRewardVariant(const std::string& name);

// Everything a run needs. Every field has a default, so "{}" plus an
// ontology path is a complete config.
struct ExperimentConfig {
  std::filesystem::path ontology_path;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "runs/default";

  EnvConfig env;
  int corpus_dialogs = 755;
  int heldout_dialogs = 150;
  DaeConfig dae;
  GanConfig gan;
  ShapingParams shaping;
  std::vector<AgentKind> agent_kinds = {AgentKind::kDqn, AgentKind::kWdqn,
                                        AgentKind::kPpo};
  std::vector<RewardVariant> variants = {
      RewardVariant::kVanilla, RewardVariant::kSeqAvg, RewardVariant::kSeqPrd};
  int agent_seeds = 10;
  int workers = 1;
  DqnConfig dqn;
  PpoConfig ppo;
  int histogram_bins = 100;
  double threshold = 0.5;
  double success_target = 0.9;

  nlohmann::json ToJson() const;
  // Relative ontology paths resolve against base_dir. Throws ConfigError
  // on unknown top-level keys or a missing ontology file.
  static ExperimentConfig FromJson(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir);
  static ExperimentConfig Load(const std::filesystem::path& path);

  Ontology LoadOntology() const;
};

// Stage manifest: written last, so a present and consistent manifest means
// the stage completed.
struct StageManifest {
  std::string stage;
  std::string config_hash;
  nlohmann::json upstream = nlohmann::json::object();  // stage -> sha256
  nlohmann::json files = nlohmann::json::object();     // name -> sha256
  nlohmann::json summary = nlohmann::json::object();

  nlohmann::json ToJson() const;
  static StageManifest FromJson(const nlohmann::json& j);
};

// Paths of one experiment's artifacts.
class ArtifactLayout {
 public:
  explicit ArtifactLayout(std::filesystem::path root) : root_(std::move(root)) {}
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path StageDir(const std::string& stage) const;
  std::filesystem::path Manifest(const std::string& stage) const;
  std::string AgentCell(AgentKind k, RewardVariant v, int seed_index) const;

 private:
  std::filesystem::path root_;
};

// Progress lines go here (stderr in the CLI); artifacts never contain
// timing or other run-dependent text.
using Logger = std::function<void(const std::string&)>;

struct StageOutcome {
  std::string stage;
  bool reused = false;
  std::string manifest_hash;
};

StageOutcome CmdGenCorpus(const ExperimentConfig& config, const Logger& log);
StageOutcome CmdTrainDae(const ExperimentConfig& config, const Logger& log);
StageOutcome CmdTrainGan(const ExperimentConfig& config, const Logger& log);
// Empty kinds/variants/seed list means every configured cell.
StageOutcome CmdTrainAgent(const ExperimentConfig& config, const Logger& log,
                           std::vector<AgentKind> kinds = {},
                           std::vector<RewardVariant> variants = {},
                           std::vector<int> seed_indices = {});
StageOutcome CmdEval(const ExperimentConfig& config, const Logger& log);
// All of the above in order, then report.md.
std::vector<StageOutcome> CmdReproduce(const ExperimentConfig& config,
                                       const Logger& log);

// Seed of the i-th agent run. Shared by every kind and variant so cells are
// paired across variants.
std::uint64_t AgentRunSeed(std::uint64_t master, int index);

// Estimator manifest path for a shaped variant.
std::filesystem::path EstimatorManifestPath(const ArtifactLayout& layout,
                                            RewardVariant v);

}  // namespace seqreward

#endif  // SEQREWARD_PIPELINE_H_
