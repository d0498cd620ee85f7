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

#include "seqreward/pipeline.h"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "seqreward/checkpoint.h"
#include "seqreward/errors.h"
#include "seqreward/evalharness.h"
#include "seqreward/hash.h"
#include "seqreward/random.h"

namespace seqreward {

namespace fs = std::filesystem;
using nlohmann::json;

std::string AgentKindName(AgentKind k) {
  switch (k) {
    case AgentKind::kDqn:
      return "dqn";
    case AgentKind::kWdqn:
      return "wdqn";
    case AgentKind::kPpo:
      return "ppo";
  }
  throw ContractViolation("bad agent kind");
}

AgentKind ParseAgentKind(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "dqn") return AgentKind::kDqn;
  if (s == "wdqn") return AgentKind::kWdqn;
  if (s == "ppo") return AgentKind::kPpo;
  throw ConfigError("unknown agent kind '" + name + "'");
}

std::string RewardVariantName(RewardVariant v) {
  switch (v) {
    case RewardVariant::kVanilla:
      return "vanilla";
    case RewardVariant::kSeqAvg:
      return "seqavg";
    case RewardVariant::kSeqPrd:
      return "seqprd";
  }
  throw ContractViolation("bad reward variant");
}

RewardVariant ParseRewardVariant(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "vanilla") return RewardVariant::kVanilla;
  if (s == "seqavg") return RewardVariant::kSeqAvg;
  if (s == "seqprd") return RewardVariant::kSeqPrd;
  throw ConfigError("unknown reward variant '" + name + "'");
}

namespace {

// Rejects keys the defaults do not know, so typos fail loudly.
void CheckKeys(const json& given, const json& defaults,
               const std::string& section) {
  if (!given.is_object()) {
    throw ConfigError("config section '" + section + "' must be an object");
  }
  for (const auto& [key, value] : given.items()) {
    if (!defaults.contains(key)) {
      throw ConfigError("unknown key '" + key + "' in config section '" +
                        section + "'");
    }
  }
}

template <typename T>
T ReadSection(const json& j, const char* key) {
  if (!j.contains(key)) return T{};
  CheckKeys(j.at(key), T{}.ToJson(), key);
  return T::FromJson(j.at(key));
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ReadJson(const fs::path& path) {
  try {
    return json::parse(ReadText(path));
  } catch (const json::exception& e) {
    throw ConfigError("malformed json in " + path.string() + ": " + e.what());
  }
}

// Writes through a temporary file so readers never see half a file.
void WriteText(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void WriteJson(const fs::path& path, const json& j) {
  WriteText(path, j.dump(2) + "\n");
}

std::string HashJson(const json& j) { return Sha256Hex(j.dump()); }

// JSON has no infinity; keep such values readable instead of null.
json Number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

std::string Fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string Fixed(const json& v) {
  return v.is_number() ? Fixed(v.get<double>()) : v.get<std::string>();
}

}  // namespace

json ExperimentConfig::ToJson() const {
  json kinds = json::array(), vars = json::array();
  for (AgentKind k : agent_kinds) kinds.push_back(AgentKindName(k));
  for (RewardVariant v : variants) vars.push_back(RewardVariantName(v));
  return {{"ontology", ontology_path.generic_string()},
          {"seed", seed},
          {"out", out_dir.generic_string()},
          {"env", env.ToJson()},
          {"corpus_dialogs", corpus_dialogs},
          {"heldout_dialogs", heldout_dialogs},
          {"dae", dae.ToJson()},
          {"gan", gan.ToJson()},
          {"shaping", shaping.ToJson()},
          {"agent_kinds", kinds},
          {"variants", vars},
          {"agent_seeds", agent_seeds},
          {"workers", workers},
          {"dqn", dqn.ToJson()},
          {"ppo", ppo.ToJson()},
          {"histogram_bins", histogram_bins},
          {"threshold", threshold},
          {"success_target", success_target}};
}

ExperimentConfig ExperimentConfig::FromJson(const json& j,
                                            const fs::path& base_dir) {
  ExperimentConfig c;
  CheckKeys(j, c.ToJson(), "top level");
  try {
    if (!j.contains("ontology")) throw ConfigError("config names no ontology");
    fs::path onto = j.at("ontology").get<std::string>();
    c.ontology_path = onto.is_absolute() ? onto : base_dir / onto;
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out", c.out_dir.string());
    c.env = ReadSection<EnvConfig>(j, "env");
    c.corpus_dialogs = j.value("corpus_dialogs", c.corpus_dialogs);
    c.heldout_dialogs = j.value("heldout_dialogs", c.heldout_dialogs);
    c.dae = ReadSection<DaeConfig>(j, "dae");
    c.gan = ReadSection<GanConfig>(j, "gan");
    if (j.contains("shaping")) {
      CheckKeys(j.at("shaping"), ShapingParams{}.ToJson(), "shaping");
      c.shaping = ShapingParams::FromJson(j.at("shaping"));
    }
    if (j.contains("agent_kinds")) {
      c.agent_kinds.clear();
      for (const auto& k : j.at("agent_kinds")) {
        c.agent_kinds.push_back(ParseAgentKind(k.get<std::string>()));
      }
    }
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j.at("variants")) {
        c.variants.push_back(ParseRewardVariant(v.get<std::string>()));
      }
    }
    c.agent_seeds = j.value("agent_seeds", c.agent_seeds);
    c.workers = j.value("workers", c.workers);
    c.dqn = ReadSection<DqnConfig>(j, "dqn");
    c.ppo = ReadSection<PpoConfig>(j, "ppo");
    c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
    c.threshold = j.value("threshold", c.threshold);
    c.success_target = j.value("success_target", c.success_target);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  if (c.corpus_dialogs < 1 || c.heldout_dialogs < 1 || c.agent_seeds < 1 ||
      c.workers < 1 || c.histogram_bins < 2) {
    throw ConfigError(
        "corpus_dialogs, heldout_dialogs, agent_seeds and workers must be >= 1 "
        "and histogram_bins >= 2");
  }
  if (!fs::exists(c.ontology_path)) {
    throw ConfigError("ontology file " + c.ontology_path.string() +
                      " does not exist");
  }
  return c;
}

ExperimentConfig ExperimentConfig::Load(const fs::path& path) {
  return FromJson(ReadJson(path), path.parent_path());
}

Ontology ExperimentConfig::LoadOntology() const {
  return Ontology::Load(ontology_path);
}

json StageManifest::ToJson() const {
  return {{"stage", stage},
          {"config_hash", config_hash},
          {"upstream", upstream},
          {"files", files},
          {"summary", summary}};
}

StageManifest StageManifest::FromJson(const json& j) {
  StageManifest m;
  try {
    m.stage = j.at("stage").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.upstream = j.at("upstream");
    m.files = j.at("files");
    m.summary = j.value("summary", json::object());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed stage manifest: ") + e.what());
  }
  return m;
}

fs::path ArtifactLayout::StageDir(const std::string& stage) const {
  return root_ / stage;
}

fs::path ArtifactLayout::Manifest(const std::string& stage) const {
  return StageDir(stage) / "manifest.json";
}

std::string ArtifactLayout::AgentCell(AgentKind k, RewardVariant v,
                                      int seed_index) const {
  return "agents/" + AgentKindName(k) + "_" + RewardVariantName(v) + "_s" +
         std::to_string(seed_index);
}

std::uint64_t AgentRunSeed(std::uint64_t master, int index) {
  return DeriveSeed(master, 1000 + static_cast<std::uint64_t>(index));
}

fs::path EstimatorManifestPath(const ArtifactLayout& layout, RewardVariant v) {
  if (v == RewardVariant::kVanilla) {
    throw ContractViolation("the vanilla variant has no estimator");
  }
  return layout.StageDir("gan") / ("estimator_" + RewardVariantName(v) + ".json");
}

namespace {

// Stage-local seeds derived from the master seed.
enum SeedStream : std::uint64_t {
  kCorpusSeed = 1,
  kHeldoutSeed = 2,
  kDaeSeed = 3,
  kGanSeed = 4,
  kTestsetSeed = 5,
};

// Returns the manifest's sha256 if it exists and every listed file matches
// its recorded hash; nullopt otherwise.
std::optional<std::string> IntactManifest(const ArtifactLayout& layout,
                                          const std::string& stage,
                                          StageManifest* out = nullptr) {
  const fs::path path = layout.Manifest(stage);
  if (!fs::exists(path)) return std::nullopt;
  StageManifest m;
  try {
    m = StageManifest::FromJson(ReadJson(path));
  } catch (const ConfigError&) {
    return std::nullopt;
  }
  for (const auto& [name, hash] : m.files.items()) {
    const fs::path f = layout.StageDir(stage) / name;
    if (!fs::exists(f) || Sha256File(f) != hash.get<std::string>()) {
      return std::nullopt;
    }
  }
  if (out) *out = m;
  return Sha256File(path);
}

// Upstream stage must be complete and untouched.
std::string RequireStage(const ArtifactLayout& layout, const std::string& stage,
                         StageManifest* out = nullptr) {
  const fs::path path = layout.Manifest(stage);
  if (!fs::exists(path)) {
    throw ConfigError("missing upstream stage '" + stage + "' (no " +
                      path.string() + ")");
  }
  const StageManifest m = StageManifest::FromJson(ReadJson(path));
  for (const auto& [name, hash] : m.files.items()) {
    const fs::path f = layout.StageDir(stage) / name;
    const std::string want = hash.get<std::string>();
    if (!fs::exists(f)) {
      throw ConfigError("stage '" + stage + "' artifact " + f.string() +
                        " is missing (expected sha256 " + want + ")");
    }
    const std::string got = Sha256File(f);
    if (got != want) {
      throw ConfigError("stale artifact " + f.string() + ": sha256 " + got +
                        " does not match recorded " + want);
    }
  }
  if (out) *out = m;
  return Sha256File(path);
}

// Reuses an existing stage when its config and upstream hashes agree.
std::optional<StageOutcome> Reusable(const ArtifactLayout& layout,
                                     const std::string& stage,
                                     const std::string& config_hash,
                                     const json& upstream) {
  StageManifest m;
  const auto hash = IntactManifest(layout, stage, &m);
  if (!hash || m.config_hash != config_hash || m.upstream != upstream) {
    return std::nullopt;
  }
  return StageOutcome{stage, true, *hash};
}

StageOutcome Finish(const ArtifactLayout& layout, StageManifest m,
                    const std::vector<std::string>& files) {
  for (const std::string& f : files) {
    m.files[f] = Sha256File(layout.StageDir(m.stage) / f);
  }
  WriteJson(layout.Manifest(m.stage), m.ToJson());
  return {m.stage, false, Sha256File(layout.Manifest(m.stage))};
}

void Note(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

// Runs body and prefixes any error with the stage name.
template <typename F>
auto InStage(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const ConfigError& e) {
    throw ConfigError("[" + stage + "] " + e.what());
  } catch (const TrainingError& e) {
    throw TrainingError("[" + stage + "] " + e.what());
  } catch (const InvalidInputError& e) {
    throw InvalidInputError("[" + stage + "] " + e.what());
  }
}

}  // namespace

StageOutcome CmdGenCorpus(const ExperimentConfig& config, const Logger& log) {
  return InStage("gen-corpus", [&] {
    const ArtifactLayout layout(config.out_dir);
    const Ontology ontology = config.LoadOntology();
    const json subset = {{"ontology_hash", ontology.Hash()},
                         {"seed", config.seed},
                         {"env", config.env.ToJson()},
                         {"corpus_dialogs", config.corpus_dialogs},
                         {"heldout_dialogs", config.heldout_dialogs}};
    const std::string stage = "corpus";
    if (auto r = Reusable(layout, stage, HashJson(subset), json::object())) {
      Note(log, "corpus: up to date");
      return *r;
    }
    const ExpertCorpus train =
        GenerateExpertCorpus(ontology, config.corpus_dialogs,
                             DeriveSeed(config.seed, kCorpusSeed), config.env);
    const ExpertCorpus heldout =
        GenerateExpertCorpus(ontology, config.heldout_dialogs,
                             DeriveSeed(config.seed, kHeldoutSeed), config.env);
    train.Save(layout.StageDir(stage) / "corpus.txt");
    heldout.Save(layout.StageDir(stage) / "heldout.txt");
    Note(log, "corpus: " + std::to_string(train.size()) + " training pairs, " +
                  std::to_string(heldout.size()) + " held-out pairs");
    StageManifest m;
    m.stage = stage;
    m.config_hash = HashJson(subset);
    m.summary = {{"pairs", train.size()},
                 {"dialogs", train.n_dialogs},
                 {"heldout_pairs", heldout.size()},
                 {"ontology_hash", ontology.Hash()}};
    return Finish(layout, m, {"corpus.txt", "heldout.txt"});
  });
}

StageOutcome CmdTrainDae(const ExperimentConfig& config, const Logger& log) {
  return InStage("train-dae", [&] {
    const ArtifactLayout layout(config.out_dir);
    const Ontology ontology = config.LoadOntology();
    const json upstream = {{"corpus", RequireStage(layout, "corpus")}};
    const json subset = {{"dae", config.dae.ToJson()}, {"seed", config.seed}};
    const std::string stage = "dae";
    if (auto r = Reusable(layout, stage, HashJson(subset), upstream)) {
      Note(log, "dae: up to date");
      return *r;
    }
    const ExpertCorpus corpus =
        ExpertCorpus::Load(layout.StageDir("corpus") / "corpus.txt");
    const ExpertCorpus heldout =
        ExpertCorpus::Load(layout.StageDir("corpus") / "heldout.txt");
    Note(log, "dae: training on " + std::to_string(corpus.size()) + " pairs");
    const DaeTrainResult r =
        TrainDae(corpus, ontology, config.dae, DeriveSeed(config.seed, kDaeSeed));
    const fs::path dir = layout.StageDir(stage);
    r.model.Save(dir / "dae.ckpt");
    std::string csv = "epoch,train_loss,validation_loss\n";
    for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
      csv += std::to_string(e) + "," + Fixed(r.train_loss[e]) + "," +
             Fixed(r.validation_loss[e]) + "\n";
    }
    WriteText(dir / "loss.csv", csv);
    const AssignmentMatrix m = BuildAssignmentMatrix(ontology);
    std::vector<int> all(heldout.size());
    for (int i = 0; i < heldout.size(); ++i) all[i] = i;
    const DaeQuality val = EvaluateDae(r.model, corpus, m, r.validation_indices);
    const DaeQuality held = EvaluateDae(r.model, heldout, m, all);
    auto quality = [](const DaeQuality& q) {
      return json{{"reconstruction_bit_accuracy", q.reconstruction_bit_accuracy},
                  {"domain_accuracy", q.classifier_accuracy[kDomain]},
                  {"act_accuracy", q.classifier_accuracy[kAct]},
                  {"slot_accuracy", q.classifier_accuracy[kSlot]}};
    };
    Note(log, "dae: best epoch " + std::to_string(r.best_epoch) +
                  ", held-out reconstruction " +
                  Fixed(held.reconstruction_bit_accuracy));
    StageManifest man;
    man.stage = stage;
    man.config_hash = HashJson(subset);
    man.upstream = upstream;
    man.summary = {{"best_epoch", r.best_epoch},
                   {"epochs", static_cast<int>(r.train_loss.size()) - 1},
                   {"dae_content_hash", r.model.ContentHash()},
                   {"validation", quality(val)},
                   {"heldout", quality(held)}};
    return Finish(layout, man, {"dae.ckpt", "loss.csv"});
  });
}

StageOutcome CmdTrainGan(const ExperimentConfig& config, const Logger& log) {
  return InStage("train-gan", [&] {
    const ArtifactLayout layout(config.out_dir);
    const Ontology ontology = config.LoadOntology();
    const json upstream = {{"corpus", RequireStage(layout, "corpus")},
                           {"dae", RequireStage(layout, "dae")}};
    const json subset = {{"gan", config.gan.ToJson()},
                         {"shaping", config.shaping.ToJson()},
                         {"seed", config.seed}};
    const std::string stage = "gan";
    if (auto r = Reusable(layout, stage, HashJson(subset), upstream)) {
      Note(log, "gan: up to date");
      return *r;
    }
    const ExpertCorpus corpus =
        ExpertCorpus::Load(layout.StageDir("corpus") / "corpus.txt");
    const fs::path dae_path = layout.StageDir("dae") / "dae.ckpt";
    const DaeModel dae = DaeModel::Load(dae_path, ontology);
    Note(log, "gan: adversarial training");
    const AdversarialResult r =
        TrainAdversarial(dae, corpus, ontology, config.gan,
                         DeriveSeed(config.seed, kGanSeed),
                         PairSchedule::Cumulative(),
                         [&](const ProbeCheck& p, const DiscriminatorSet&) {
                           if (p.disc_steps % (50 * config.gan.check_every) == 0) {
                             Note(log, "gan: stage " + std::to_string(p.stage + 1) +
                                           " step " + std::to_string(p.disc_steps) +
                                           " probe " + Fixed(p.accuracy));
                           }
                         });
    const fs::path dir = layout.StageDir(stage);
    const fs::path ckpt_path = dir / "adversarial.ckpt";
    AdversarialCheckpoint(r, ontology, dae, config.gan, true).Save(ckpt_path);
    std::string csv = "stage,disc_steps,probe_accuracy\n";
    for (const ProbeCheck& p : r.probes) {
      csv += std::to_string(p.stage + 1) + "," + std::to_string(p.disc_steps) +
             "," + Fixed(p.accuracy) + "\n";
    }
    WriteText(dir / "probes.csv", csv);
    std::vector<std::string> files = {"adversarial.ckpt", "probes.csv"};
    for (RewardVariant v : {RewardVariant::kSeqAvg, RewardVariant::kSeqPrd}) {
      ShapingParams p = config.shaping;
      p.combination =
          v == RewardVariant::kSeqAvg ? Combination::kSeqAvg : Combination::kSeqPrd;
      json est = RewardEstimator::Manifest(ontology, dae_path, ckpt_path, p);
      // Relative paths keep the run directory relocatable.
      est["dae"] = "../dae/dae.ckpt";
      est["discriminators"] = "adversarial.ckpt";
      const fs::path est_path = EstimatorManifestPath(layout, v);
      WriteJson(est_path, est);
      files.push_back(est_path.filename().string());
    }
    json stages = json::array();
    for (const StageReport& s : r.stages) {
      stages.push_back({{"live", s.live},
                        {"generator_steps", s.generator_steps},
                        {"discriminator_steps", s.discriminator_steps},
                        {"final_probe_accuracy", s.final_probe_accuracy},
                        {"converged", s.converged}});
      Note(log, "gan: stage with " + std::to_string(s.live.size()) +
                    " live pair(s) ran " + std::to_string(s.discriminator_steps) +
                    " discriminator steps, probe " +
                    Fixed(s.final_probe_accuracy));
    }
    StageManifest man;
    man.stage = stage;
    man.config_hash = HashJson(subset);
    man.upstream = upstream;
    man.summary = {{"stages", stages}};
    return Finish(layout, man, files);
  });
}

namespace {

struct Cell {
  AgentKind kind;
  RewardVariant variant;
  int seed_index;
};

std::vector<Cell> Cells(const ExperimentConfig& config,
                        std::vector<AgentKind> kinds,
                        std::vector<RewardVariant> variants,
                        std::vector<int> seeds) {
  if (kinds.empty()) kinds = config.agent_kinds;
  if (variants.empty()) variants = config.variants;
  if (seeds.empty()) {
    for (int i = 0; i < config.agent_seeds; ++i) seeds.push_back(i);
  }
  std::vector<Cell> cells;
  for (AgentKind k : kinds) {
    for (RewardVariant v : variants) {
      for (int s : seeds) {
        if (s < 0) throw ConfigError("negative seed index");
        cells.push_back({k, v, s});
      }
    }
  }
  return cells;
}

json CellSubset(const ExperimentConfig& config, const Cell& c) {
  json j = {{"kind", AgentKindName(c.kind)},
            {"variant", RewardVariantName(c.variant)},
            {"run_seed", AgentRunSeed(config.seed, c.seed_index)},
            {"env", config.env.ToJson()}};
  j["agent"] = c.kind == AgentKind::kPpo ? config.ppo.ToJson()
                                         : config.dqn.ToJson();
  return j;
}

StageOutcome RunCell(const ExperimentConfig& config, const Ontology& ontology,
                     const Cell& c, const Logger& log) {
  const ArtifactLayout layout(config.out_dir);
  const std::string stage = layout.AgentCell(c.kind, c.variant, c.seed_index);
  json upstream = json::object();
  const bool needs_corpus = c.kind != AgentKind::kDqn;
  const bool shaped = c.variant != RewardVariant::kVanilla;
  if (needs_corpus) upstream["corpus"] = RequireStage(layout, "corpus");
  if (shaped) upstream["gan"] = RequireStage(layout, "gan");
  const json subset = CellSubset(config, c);
  if (auto r = Reusable(layout, stage, HashJson(subset), upstream)) {
    Note(log, stage + ": up to date");
    return *r;
  }
  std::optional<RewardEstimator> est;
  if (shaped) {
    est.emplace(RewardEstimator::Load(EstimatorManifestPath(layout, c.variant),
                                      ontology));
  }
  std::optional<ExpertCorpus> corpus;
  if (needs_corpus) {
    corpus = ExpertCorpus::Load(layout.StageDir("corpus") / "corpus.txt");
  }
  const std::uint64_t seed = AgentRunSeed(config.seed, c.seed_index);
  const RewardEstimator* e = est ? &*est : nullptr;
  LearningCurve curve;
  Checkpoint ckpt;
  json summary;
  switch (c.kind) {
    case AgentKind::kDqn: {
      TrainOutput out = DqnTrain(ontology, config.env, e, config.dqn, seed);
      curve = out.curve;
      ckpt = out.agent->ToCheckpoint();
      summary = {{"episodes", out.episodes}};
      break;
    }
    case AgentKind::kWdqn: {
      TrainOutput out =
          WdqnTrain(ontology, config.env, e, *corpus, config.dqn, seed);
      curve = out.curve;
      ckpt = out.agent->ToCheckpoint();
      summary = {{"episodes", out.episodes}};
      break;
    }
    case AgentKind::kPpo: {
      PpoTrainOutput out =
          PpoTrain(ontology, config.env, e, *corpus, config.ppo, seed);
      curve = out.curve;
      ckpt = out.agent->ToCheckpoint();
      summary = {{"imitation_accuracy", out.imitation_accuracy},
                 {"after_imitation_success", out.after_imitation.success_rate}};
      break;
    }
  }
  const fs::path dir = layout.StageDir(stage);
  WriteText(dir / "curve.csv", curve.ToCsv());
  ckpt.Save(dir / "agent.ckpt");
  summary["final_success"] = curve.Final().success_rate;
  summary["run_seed"] = seed;
  Note(log, stage + ": final success " + Fixed(curve.Final().success_rate));
  StageManifest m;
  m.stage = stage;
  m.config_hash = HashJson(subset);
  m.upstream = upstream;
  m.summary = summary;
  return Finish(layout, m, {"curve.csv", "agent.ckpt"});
}

}  // namespace

StageOutcome CmdTrainAgent(const ExperimentConfig& config, const Logger& log,
                           std::vector<AgentKind> kinds,
                           std::vector<RewardVariant> variants,
                           std::vector<int> seed_indices) {
  return InStage("train-agent", [&] {
    const Ontology ontology = config.LoadOntology();
    const std::vector<Cell> cells =
        Cells(config, std::move(kinds), std::move(variants),
              std::move(seed_indices));
    std::mutex log_mu;
    Logger safe_log = [&](const std::string& s) {
      std::lock_guard<std::mutex> lock(log_mu);
      Note(log, s);
    };
    std::vector<StageOutcome> outcomes(cells.size());
    std::vector<std::string> errors(cells.size());
    std::vector<bool> config_errors(cells.size(), false);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        try {
          outcomes[i] = RunCell(config, ontology, cells[i], safe_log);
        } catch (const ConfigError& e) {
          errors[i] = e.what();
          config_errors[i] = true;
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    };
    const int n_workers =
        std::max(1, std::min<int>(config.workers, static_cast<int>(cells.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (errors[i].empty()) continue;
      const std::string msg =
          ArtifactLayout(config.out_dir)
              .AgentCell(cells[i].kind, cells[i].variant, cells[i].seed_index) +
          ": " + errors[i];
      if (config_errors[i]) throw ConfigError(msg);
      throw TrainingError(msg);
    }
    StageOutcome all{"agents", true, ""};
    json hashes = json::object();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      all.reused = all.reused && outcomes[i].reused;
      hashes[outcomes[i].stage] = outcomes[i].manifest_hash;
    }
    all.manifest_hash = HashJson(hashes);
    return all;
  });
}

namespace {

std::string AggregateCsv(const std::vector<AggregatePoint>& pts) {
  std::string csv =
      "frames,success_mean,success_std,reward_mean,reward_std,turn_mean,"
      "turn_std\n";
  for (const AggregatePoint& p : pts) {
    csv += std::to_string(p.frames) + "," + Fixed(p.success_mean) + "," +
           Fixed(p.success_std) + "," + Fixed(p.reward_mean) + "," +
           Fixed(p.reward_std) + "," + Fixed(p.turn_mean) + "," +
           Fixed(p.turn_std) + "\n";
  }
  return csv;
}

}  // namespace

StageOutcome CmdEval(const ExperimentConfig& config, const Logger& log) {
  return InStage("eval", [&] {
    const ArtifactLayout layout(config.out_dir);
    const Ontology ontology = config.LoadOntology();
    const AssignmentMatrix m = BuildAssignmentMatrix(ontology);
    const std::string stage = "eval";
    const fs::path dir = layout.StageDir(stage);

    json upstream = {{"corpus", RequireStage(layout, "corpus")}};
    const bool have_gan = fs::exists(layout.Manifest("gan"));
    if (have_gan) upstream["gan"] = RequireStage(layout, "gan");
    const std::vector<Cell> cells = Cells(config, {}, {}, {});
    for (const Cell& c : cells) {
      const std::string cell = layout.AgentCell(c.kind, c.variant, c.seed_index);
      if (fs::exists(layout.Manifest(cell))) {
        upstream[cell] = RequireStage(layout, cell);
      }
    }
    const json subset = {{"histogram_bins", config.histogram_bins},
                         {"threshold", config.threshold},
                         {"success_target", config.success_target},
                         {"seed", config.seed},
                         {"shaping", config.shaping.ToJson()}};
    if (auto r = Reusable(layout, stage, HashJson(subset), upstream)) {
      Note(log, "eval: up to date");
      return *r;
    }
    std::vector<std::string> files;
    json summary = json::object();

    // Reward-model analysis on the held-out corpus.
    if (have_gan) {
      const ExpertCorpus heldout =
          ExpertCorpus::Load(layout.StageDir("corpus") / "heldout.txt");
      std::optional<ClassifierTestSet> ts;
      try {
        ts = BuildTestset(heldout, m, DeriveSeed(config.seed, kTestsetSeed));
      } catch (const ConfigError& e) {
        summary["classification"] = std::string("skipped: ") + e.what();
        Note(log, "eval: classification skipped (" + std::string(e.what()) + ")");
      }
      if (ts) {
        const RewardEstimator est = RewardEstimator::Load(
            EstimatorManifestPath(layout, RewardVariant::kSeqPrd), ontology);
        const TestsetScores scores = ScoreTestset(est, *ts);
        std::string csv =
            "variant,accuracy,precision,recall,f1,bias_ratio,jsd,"
            "real_top_decile,fake_bottom_decile,tp,fp,tn,fn\n";
        json table = json::object();
        for (ScoreVariant v : AllVariants()) {
          const double tau = config.shaping.tau, b = config.shaping.b;
          const auto pos = VariantScores(scores.positive, v, tau, b);
          const auto neg = VariantScores(scores.negative, v, tau, b);
          const ClassificationResult cr =
              ClassificationMetrics(pos, neg, config.threshold);
          const auto [hr, hf] = ScoreHistograms(pos, neg, config.histogram_bins);
          const auto [dr, df] = ScoreHistograms(pos, neg, 10);
          const double jsd = JsDivergence(hr, hf);
          const std::string name = VariantName(v);
          csv += name + "," + Fixed(cr.accuracy) + "," + Fixed(cr.precision) +
                 "," + Fixed(cr.recall) + "," + Fixed(cr.f1) + "," +
                 Fixed(cr.bias_ratio) + "," + Fixed(jsd) + "," +
                 Fixed(dr.MassFraction(9)) + "," + Fixed(df.MassFraction(0)) +
                 "," + std::to_string(cr.tp) + "," + std::to_string(cr.fp) +
                 "," + std::to_string(cr.tn) + "," + std::to_string(cr.fn) +
                 "\n";
          table[name] = {{"accuracy", cr.accuracy},
                         {"precision", cr.precision},
                         {"recall", cr.recall},
                         {"f1", cr.f1},
                         {"bias_ratio", Number(cr.bias_ratio)},
                         {"jsd", jsd},
                         {"real_top_decile", dr.MassFraction(9)},
                         {"fake_bottom_decile", df.MassFraction(0)}};
          std::string hist = "bin_low,bin_high,real,fake\n";
          for (int k = 0; k < hr.num_bins(); ++k) {
            hist += Fixed(hr.edges[k]) + "," + Fixed(hr.edges[k + 1]) + "," +
                    std::to_string(hr.counts[k]) + "," +
                    std::to_string(hf.counts[k]) + "\n";
          }
          WriteText(dir / ("hist_" + name + ".csv"), hist);
          WriteText(dir / ("hist_" + name + ".svg"),
                    HistogramSvg(hr, hf, name + " scores, real vs fake"));
          files.push_back("hist_" + name + ".csv");
          files.push_back("hist_" + name + ".svg");
        }
        WriteText(dir / "classification.csv", csv);
        files.push_back("classification.csv");
        summary["classification"] = table;
        summary["testset_pairs"] = ts->size();
        Note(log, "eval: classification table over " +
                      std::to_string(ts->size()) + " pairs per class");
      }
    }

    // Learning-curve aggregates per agent kind and reward variant.
    std::string final_csv =
        "agent,variant,runs,success_mean,success_std,reward_mean,reward_std,"
        "turn_mean,turn_std,median_frames_to_target\n";
    json finals = json::object();
    bool any_curves = false;
    for (AgentKind k : config.agent_kinds) {
      std::vector<std::pair<std::string, std::vector<AggregatePoint>>> series;
      for (RewardVariant v : config.variants) {
        std::vector<LearningCurve> curves;
        for (int s = 0; s < config.agent_seeds; ++s) {
          const std::string cell = layout.AgentCell(k, v, s);
          if (!upstream.contains(cell)) continue;
          curves.push_back(LearningCurve::FromCsv(
              ReadText(layout.StageDir(cell) / "curve.csv")));
        }
        if (curves.empty()) continue;
        any_curves = true;
        const auto agg = AggregateRuns(curves);
        std::vector<double> frames;
        for (const LearningCurve& c : curves) {
          frames.push_back(CensoredFramesToReach(c, config.success_target));
        }
        const double median_frames = Median(frames);
        const std::string name = AgentKindName(k) + "_" + RewardVariantName(v);
        WriteText(dir / ("curve_" + name + ".csv"), AggregateCsv(agg));
        files.push_back("curve_" + name + ".csv");
        const AggregatePoint& f = agg.back();
        final_csv += AgentKindName(k) + "," + RewardVariantName(v) + "," +
                     std::to_string(curves.size()) + "," +
                     Fixed(f.success_mean) + "," + Fixed(f.success_std) + "," +
                     Fixed(f.reward_mean) + "," + Fixed(f.reward_std) + "," +
                     Fixed(f.turn_mean) + "," + Fixed(f.turn_std) + "," +
                     Fixed(median_frames) + "\n";
        json fr = json::array();
        for (double x : frames) fr.push_back(x);
        finals[name] = {{"runs", curves.size()},
                        {"success_mean", f.success_mean},
                        {"success_std", f.success_std},
                        {"reward_mean", f.reward_mean},
                        {"turn_mean", f.turn_mean},
                        {"median_frames_to_target", median_frames},
                        {"frames_to_target", fr}};
        series.emplace_back(name, agg);
      }
      if (!series.empty()) {
        const std::string svg = "curves_" + AgentKindName(k) + ".svg";
        WriteText(dir / svg,
                  CurvesSvg(series, AgentKindName(k) + " success rate"));
        files.push_back(svg);
      }
    }
    if (any_curves) {
      WriteText(dir / "agents_final.csv", final_csv);
      files.push_back("agents_final.csv");
      summary["agents"] = finals;
    }
    StageManifest man;
    man.stage = stage;
    man.config_hash = HashJson(subset);
    man.upstream = upstream;
    man.summary = summary;
    return Finish(layout, man, files);
  });
}

namespace {

// Where and how wide a run executes is not part of what it computes.
json PortableConfig(const ExperimentConfig& config) {
  json j = config.ToJson();
  j.erase("out");
  j.erase("workers");
  return j;
}

std::string ReportMarkdown(const ExperimentConfig& config,
                           const std::vector<StageOutcome>& outcomes) {
  const ArtifactLayout layout(config.out_dir);
  std::ostringstream md;
  md << "# Experiment report\n\n";
  md << "Config hash: `" << HashJson(PortableConfig(config)) << "`  \n";
  md << "Master seed: " << config.seed << "\n\n";
  md << "## Artifacts\n\n| stage | manifest sha256 |\n|---|---|\n";
  std::vector<std::string> stages = {"corpus", "dae", "gan"};
  for (const Cell& c : Cells(config, {}, {}, {})) {
    stages.push_back(layout.AgentCell(c.kind, c.variant, c.seed_index));
  }
  stages.push_back("eval");
  for (const std::string& s : stages) {
    if (!fs::exists(layout.Manifest(s))) continue;
    md << "| " << s << " | `" << Sha256File(layout.Manifest(s)) << "` |\n";
  }
  (void)outcomes;
  const StageManifest eval =
      StageManifest::FromJson(ReadJson(layout.Manifest("eval")));
  if (eval.files.contains("classification.csv")) {
    md << "\n## Reward model on the held-out test set\n\n";
    md << "| variant | accuracy | precision | recall | F1 | TN/TP | JSD (nats) | "
          "real top decile | fake bottom decile |\n";
    md << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& [name, r] : eval.summary.at("classification").items()) {
      md << "| " << name << " | " << Fixed(r.at("accuracy")) << " | "
         << Fixed(r.at("precision")) << " | " << Fixed(r.at("recall")) << " | "
         << Fixed(r.at("f1")) << " | " << Fixed(r.at("bias_ratio")) << " | "
         << Fixed(r.at("jsd")) << " | " << Fixed(r.at("real_top_decile"))
         << " | " << Fixed(r.at("fake_bottom_decile")) << " |\n";
    }
    md << "\nHistograms: ";
    for (ScoreVariant v : AllVariants()) {
      md << "[" << VariantName(v) << "](eval/hist_" << VariantName(v)
         << ".svg) ";
    }
    md << "\n";
  } else if (eval.summary.contains("classification")) {
    md << "\nReward-model classification: "
       << eval.summary.at("classification").get<std::string>() << "\n";
  }
  if (eval.summary.contains("agents")) {
    md << "\n## Agents (final checkpoint, mean over runs)\n\n";
    char target[32];
    std::snprintf(target, sizeof(target), "%g", config.success_target);
    md << "| agent | runs | success | std | reward score | turns | median "
          "frames to "
       << target << " |\n|---|---|---|---|---|---|---|\n";
    for (const auto& [name, r] : eval.summary.at("agents").items()) {
      md << "| " << name << " | " << r.at("runs") << " | "
         << Fixed(r.at("success_mean")) << " | " << Fixed(r.at("success_std"))
         << " | " << Fixed(r.at("reward_mean")) << " | "
         << Fixed(r.at("turn_mean")) << " | "
         << Fixed(r.at("median_frames_to_target")) << " |\n";
    }
    md << "\nCurves: ";
    for (AgentKind k : config.agent_kinds) {
      md << "[" << AgentKindName(k) << "](eval/curves_" << AgentKindName(k)
         << ".svg) ";
    }
    md << "\n";
  }
  return md.str();
}

}  // namespace

std::vector<StageOutcome> CmdReproduce(const ExperimentConfig& config,
                                       const Logger& log) {
  std::vector<StageOutcome> out;
  out.push_back(CmdGenCorpus(config, log));
  out.push_back(CmdTrainDae(config, log));
  out.push_back(CmdTrainGan(config, log));
  out.push_back(CmdTrainAgent(config, log));
  out.push_back(CmdEval(config, log));
  InStage("reproduce", [&] {
    WriteText(ArtifactLayout(config.out_dir).root() / "report.md",
              ReportMarkdown(config, out));
    WriteJson(ArtifactLayout(config.out_dir).root() / "config.json",
              PortableConfig(config));
  });
  return out;
}

}  // namespace seqreward
