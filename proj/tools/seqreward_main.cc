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

// Command-line front end for the staged experiment pipeline.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqreward/errors.h"
#include "seqreward/pipeline.h"

namespace {

using seqreward::ExperimentConfig;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

ExperimentConfig Resolve(const GlobalFlags& flags) {
  ExperimentConfig c = ExperimentConfig::Load(flags.config);
  if (flags.seed) c.seed = *flags.seed;
  if (flags.out) c.out_dir = *flags.out;
  return c;
}

void Print(const seqreward::StageOutcome& o) {
  std::cout << o.stage << (o.reused ? " reused " : " built ") << o.manifest_hash
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-level sequential reward estimation experiments"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--config", flags.config, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Master seed override");
  app.add_option("--out", flags.out, "Output directory override");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  auto* gen = app.add_subcommand("gen-corpus", "Generate the expert corpus");
  auto* dae = app.add_subcommand("train-dae", "Train the disentangled autoencoder");
  auto* gan = app.add_subcommand("train-gan", "Train the adversarial reward model");
  auto* agent = app.add_subcommand("train-agent", "Train dialog agents");
  std::vector<std::string> kinds, variants;
  std::vector<int> seeds;
  agent->add_option("--agent", kinds, "Agent kinds (dqn, wdqn, ppo)");
  agent->add_option("--variant", variants, "Reward variants (vanilla, seqavg, seqprd)");
  agent->add_option("--seed-index", seeds, "Run indices");
  auto* eval = app.add_subcommand("eval", "Score estimators and aggregate curves");
  auto* repro = app.add_subcommand("reproduce", "Run every stage and write report.md");

  CLI11_PARSE(app, argc, argv);

  seqreward::Logger log;
  if (!quiet) log = [](const std::string& s) { std::cerr << s << std::endl; };
  try {
    const ExperimentConfig config = Resolve(flags);
    if (gen->parsed()) Print(seqreward::CmdGenCorpus(config, log));
    if (dae->parsed()) Print(seqreward::CmdTrainDae(config, log));
    if (gan->parsed()) Print(seqreward::CmdTrainGan(config, log));
    if (agent->parsed()) {
      std::vector<seqreward::AgentKind> k;
      std::vector<seqreward::RewardVariant> v;
      for (const auto& s : kinds) k.push_back(seqreward::ParseAgentKind(s));
      for (const auto& s : variants) v.push_back(seqreward::ParseRewardVariant(s));
      Print(seqreward::CmdTrainAgent(config, log, k, v, seeds));
    }
    if (eval->parsed()) Print(seqreward::CmdEval(config, log));
    if (repro->parsed()) {
      for (const auto& o : seqreward::CmdReproduce(config, log)) Print(o);
    }
  } catch (const seqreward::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
