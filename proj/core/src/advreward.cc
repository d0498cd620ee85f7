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

#include "seqreward/advreward.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqreward/errors.h"
#include "seqreward/random.h"

namespace seqreward {

using nn::Matrix;

nlohmann::json GanConfig::ToJson() const {
  return {{"z_dim", z_dim},
          {"hidden", hidden},
          {"gumbel_temperature", gumbel_temperature},
          {"batch_size", batch_size},
          {"generator_steps_per_disc_step", generator_steps_per_disc_step},
          {"max_generator_steps_per_stage", max_generator_steps_per_stage},
          {"min_disc_steps_per_stage", min_disc_steps_per_stage},
          {"check_every", check_every},
          {"stable_checks", stable_checks},
          {"probe_low", probe_low},
          {"probe_high", probe_high},
          {"probe_size", probe_size},
          {"generator_l2", generator_l2},
          {"generator_lr", generator_lr},
          {"generator_lr_scale", generator_lr_scale},
          {"discriminator_lr", discriminator_lr},
          {"holdout_fraction", holdout_fraction}};
}

GanConfig GanConfig::FromJson(const nlohmann::json& j) {
  GanConfig c;
  try {
#define SEQREWARD_READ(field) c.field = j.value(#field, c.field)
    SEQREWARD_READ(z_dim);
    SEQREWARD_READ(hidden);
    SEQREWARD_READ(gumbel_temperature);
    SEQREWARD_READ(batch_size);
    SEQREWARD_READ(generator_steps_per_disc_step);
    SEQREWARD_READ(max_generator_steps_per_stage);
    SEQREWARD_READ(min_disc_steps_per_stage);
    SEQREWARD_READ(check_every);
    SEQREWARD_READ(stable_checks);
    SEQREWARD_READ(probe_low);
    SEQREWARD_READ(probe_high);
    SEQREWARD_READ(probe_size);
    SEQREWARD_READ(generator_l2);
    SEQREWARD_READ(generator_lr);
    SEQREWARD_READ(generator_lr_scale);
    SEQREWARD_READ(discriminator_lr);
    SEQREWARD_READ(holdout_fraction);
#undef SEQREWARD_READ
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad gan config: ") + e.what());
  }
  if (c.z_dim < 1 || c.hidden < 1 || !(c.gumbel_temperature > 0.0) ||
      c.batch_size < 1 || c.generator_steps_per_disc_step < 1 ||
      c.max_generator_steps_per_stage < 1 || c.check_every < 1 ||
      c.stable_checks < 1 || c.probe_size < 1 ||
      !(c.probe_low < c.probe_high) || c.generator_l2 < 0.0 ||
      c.holdout_fraction <= 0.0 || c.holdout_fraction >= 1.0) {
    throw ConfigError("gan config out of range");
  }
  for (double scale : c.generator_lr_scale) {
    if (!(scale >= 0.0)) throw ConfigError("generator_lr_scale must be >= 0");
  }
  return c;
}

namespace {

Matrix NormalMatrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = StandardNormal(rng);
  return m;
}

const Matrix& Projection(const AssignmentMatrix& m, int level) {
  switch (level) {
    case kDomain:
      return m.DomainProjection();
    case kAct:
      return m.ActProjection();
    case kSlot:
      return m.SlotProjection();
  }
  throw ContractViolation("bad level index");
}

bool IsLive(const std::vector<int>& live, int level) {
  return std::find(live.begin(), live.end(), level) != live.end();
}

void CheckLevels(const std::vector<int>& live) {
  for (int l : live) {
    if (l < 0 || l >= kNumLevels) throw ContractViolation("bad level index");
  }
}

}  // namespace

GeneratorNoise GeneratorNoise::Draw(int n, int z_dim, int latent_dim,
                                    int action_dim, Rng& rng) {
  GeneratorNoise g;
  g.z = NormalMatrix(n, z_dim, rng);
  for (auto& e : g.eps) e = NormalMatrix(n, latent_dim, rng);
  g.gumbel.resize(n, action_dim);
  for (Eigen::Index k = 0; k < g.gumbel.size(); ++k) {
    const double u = std::clamp(Uniform01(rng), 1e-20, 1.0 - 1e-16);
    g.gumbel(k) = -std::log(-std::log(u));
  }
  return g;
}

GeneratorSet::GeneratorSet(int z_dim, int latent_dim, int hidden,
                           int action_dim, Rng& rng) {
  using nn::Activation;
  for (int i = 0; i < kNumLevels; ++i) {
    const std::string lvl = LevelName(i);
    body_[i] = nn::DenseNet("gen." + lvl + ".body", {z_dim, hidden, hidden},
                            {Activation::kRelu, Activation::kRelu}, rng);
    mean_[i] = nn::DenseNet("gen." + lvl + ".mean", {hidden, latent_dim},
                            {Activation::kIdentity}, rng);
    log_var_[i] = nn::DenseNet("gen." + lvl + ".log_var",
                               {hidden, latent_dim}, {Activation::kIdentity},
                               rng);
  }
  act_ = nn::DenseNet("gen.act", {z_dim, hidden, action_dim},
                      {Activation::kRelu, Activation::kIdentity}, rng);
}

SubBatch GeneratorSet::Generate(const GeneratorNoise& noise,
                                const AssignmentMatrix& m, double temperature,
                                Trace* trace, bool soft_actions) const {
  if (m.action_dim() != action_dim()) {
    throw ContractViolation("generator action width does not match ontology");
  }
  Trace local;
  Trace& t = trace ? *trace : local;
  SubBatch out;
  for (int i = 0; i < kNumLevels; ++i) {
    const Matrix h = body_[i].Forward(noise.z, &t.body[i]);
    const Matrix mu = mean_[i].Forward(h, &t.mean[i]);
    t.raw_log_var[i] = log_var_[i].Forward(h, &t.log_var[i]);
    t.rep[i] = nn::ReparameterizeWithNoise(
        mu, nn::ClampLogVar(t.raw_log_var[i]), noise.eps[i]);
    out.states[i] = t.rep[i].sample;
  }
  const Matrix logits = act_.Forward(noise.z, &t.act);
  t.gumbel = nn::StGumbelSoftmaxWithNoise(logits, temperature, noise.gumbel);
  out.full_actions = soft_actions ? t.gumbel.soft : t.gumbel.hard;
  for (int i = 0; i < kNumLevels; ++i) {
    out.actions[i] = out.full_actions * Projection(m, i);
  }
  return out;
}

void GeneratorSet::Backward(const Trace& trace, const AssignmentMatrix& m,
                            const SubBatch& grads,
                            const std::vector<int>& live) {
  CheckLevels(live);
  Matrix g_full = Matrix::Zero(trace.gumbel.hard.rows(),
                               trace.gumbel.hard.cols());
  for (int i : live) {
    Matrix g_lv;
    const Matrix g_mu = trace.rep[i].Backward(
        grads.states[i], nn::ClampLogVar(trace.raw_log_var[i]), &g_lv);
    Matrix g_h = mean_[i].Backward(trace.mean[i], g_mu);
    g_h += log_var_[i].Backward(
        trace.log_var[i], nn::ClampLogVarGrad(trace.raw_log_var[i], g_lv));
    body_[i].Backward(trace.body[i], g_h);
    g_full += grads.actions[i] * Projection(m, i).transpose();
  }
  act_.Backward(trace.act, trace.gumbel.Backward(g_full));
}

std::vector<nn::Parameter*> GeneratorSet::LevelParameters(int level) {
  std::vector<nn::Parameter*> out;
  for (nn::DenseNet* net : {&body_.at(level), &mean_.at(level),
                            &log_var_.at(level)}) {
    for (nn::Parameter* p : net->Parameters()) out.push_back(p);
  }
  return out;
}

std::vector<nn::Parameter*> GeneratorSet::ActionParameters() {
  return act_.Parameters();
}

std::vector<nn::Parameter*> GeneratorSet::Parameters() {
  std::vector<nn::Parameter*> out;
  for (int i = 0; i < kNumLevels; ++i) {
    for (nn::Parameter* p : LevelParameters(i)) out.push_back(p);
  }
  for (nn::Parameter* p : ActionParameters()) out.push_back(p);
  return out;
}

double GeneratorSet::WeightSquaredNorm(const std::vector<int>& levels) const {
  double total = act_.WeightSquaredNorm();
  for (int i : levels) {
    total += body_.at(i).WeightSquaredNorm() + mean_.at(i).WeightSquaredNorm() +
             log_var_.at(i).WeightSquaredNorm();
  }
  return total;
}

void GeneratorSet::ZeroGrad() {
  for (nn::Parameter* p : Parameters()) p->grad.setZero();
}

void GeneratorSet::ExportTo(Checkpoint& ckpt) const {
  for (int i = 0; i < kNumLevels; ++i) {
    body_[i].ExportTo(ckpt);
    mean_[i].ExportTo(ckpt);
    log_var_[i].ExportTo(ckpt);
  }
  act_.ExportTo(ckpt);
}

void GeneratorSet::ImportFrom(const Checkpoint& ckpt) {
  for (int i = 0; i < kNumLevels; ++i) {
    body_[i].ImportFrom(ckpt);
    mean_[i].ImportFrom(ckpt);
    log_var_[i].ImportFrom(ckpt);
  }
  act_.ImportFrom(ckpt);
}

bool GeneratorSet::operator==(const GeneratorSet& o) const {
  return body_ == o.body_ && mean_ == o.mean_ && log_var_ == o.log_var_ &&
         act_ == o.act_;
}

SubBatch GenerateFake(const GeneratorSet& gen, int n,
                      const AssignmentMatrix& m, double temperature,
                      Rng& rng) {
  const GeneratorNoise noise = GeneratorNoise::Draw(
      n, gen.z_dim(), gen.latent_dim(), gen.action_dim(), rng);
  return gen.Generate(noise, m, temperature);
}

DiscriminatorSet::DiscriminatorSet(int latent_dim,
                                   std::array<int, kNumLevels> level_sizes,
                                   int hidden, Rng& rng)
    : latent_dim_(latent_dim) {
  using nn::Activation;
  for (int i = 0; i < kNumLevels; ++i) {
    nets_[i] = nn::DenseNet(std::string("disc.") + LevelName(i),
                            {latent_dim + level_sizes[i], hidden, 1},
                            {Activation::kRelu, Activation::kSigmoid}, rng);
  }
}

Matrix DiscriminatorSet::Forward(int level, const Matrix& states,
                                 const Matrix& actions,
                                 nn::NetCache* cache) const {
  if (states.rows() != actions.rows() || states.cols() != latent_dim_) {
    throw ContractViolation("discriminator input shape mismatch");
  }
  Matrix x(states.rows(), states.cols() + actions.cols());
  x << states, actions;
  return nets_.at(level).Forward(x, cache);
}

Matrix DiscriminatorSet::Score(int level, const Matrix& states,
                               const Matrix& actions) const {
  return Forward(level, states, actions)
      .cwiseMax(nn::kProbEpsilon)
      .cwiseMin(1.0 - nn::kProbEpsilon);
}

Matrix DiscriminatorSet::Backward(int level, const nn::NetCache& cache,
                                  const Matrix& grad_out) {
  return nets_.at(level).Backward(cache, grad_out);
}

std::vector<nn::Parameter*> DiscriminatorSet::LevelParameters(int level) {
  return nets_.at(level).Parameters();
}

void DiscriminatorSet::ZeroGrad() {
  for (auto& n : nets_) n.ZeroGrad();
}

void DiscriminatorSet::ExportTo(Checkpoint& ckpt) const {
  for (const auto& n : nets_) n.ExportTo(ckpt);
}

void DiscriminatorSet::ImportFrom(const Checkpoint& ckpt) {
  for (auto& n : nets_) n.ImportFrom(ckpt);
}

bool DiscriminatorSet::operator==(const DiscriminatorSet& o) const {
  return latent_dim_ == o.latent_dim_ && nets_ == o.nets_;
}

PairSchedule PairSchedule::Cumulative() {
  return PairSchedule{{{kDomain}, {kDomain, kAct}, {kDomain, kAct, kSlot}}};
}

SubBatch SampleRealFrom(const DaeModel& dae, const ExpertCorpus& corpus,
                        const AssignmentMatrix& m,
                        const std::vector<int>& rows, Rng& rng) {
  std::vector<DialogState> states;
  SubBatch out;
  out.full_actions = Matrix::Zero(static_cast<Eigen::Index>(rows.size()),
                                  m.action_dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    states.push_back(corpus.states.at(rows[r]));
    out.full_actions(static_cast<Eigen::Index>(r),
                     corpus.actions.at(rows[r]).index) = 1.0;
  }
  const DaeLatents lat = dae.Encode(StackStates(states), &rng, true);
  for (int i = 0; i < kNumLevels; ++i) {
    out.states[i] = lat.blocks[i];
    out.actions[i] = out.full_actions * Projection(m, i);
  }
  return out;
}

SubBatch SampleReal(const DaeModel& dae, const ExpertCorpus& corpus,
                    const AssignmentMatrix& m, int batch, Rng& rng) {
  if (corpus.size() == 0) throw InvalidInputError("corpus is empty");
  std::vector<int> rows(batch);
  for (int& r : rows) r = UniformInt(rng, 0, corpus.size() - 1);
  return SampleRealFrom(dae, corpus, m, rows, rng);
}

std::array<double, kNumLevels> DiscriminatorLoss(
    DiscriminatorSet& disc, const SubBatch& real, const SubBatch& fake,
    const std::vector<int>& live, bool accumulate_grads) {
  CheckLevels(live);
  std::array<double, kNumLevels> out{};
  for (int i = 0; i < kNumLevels; ++i) {
    nn::NetCache rc, fc;
    const Matrix dr = disc.Forward(i, real.states[i], real.actions[i], &rc);
    const Matrix df = disc.Forward(i, fake.states[i], fake.actions[i], &fc);
    const nn::LossResult lr = nn::BceLoss(dr, Matrix::Ones(dr.rows(), 1));
    const nn::LossResult lf = nn::BceLoss(df, Matrix::Zero(df.rows(), 1));
    out[i] = lr.value + lf.value;
    if (accumulate_grads && IsLive(live, i)) {
      disc.Backward(i, rc, lr.grad);
      disc.Backward(i, fc, lf.grad);
    }
  }
  return out;
}

double GeneratorLoss(GeneratorSet& gen, const GeneratorSet::Trace& trace,
                     const SubBatch& fake, DiscriminatorSet& disc,
                     const AssignmentMatrix& m, const std::vector<int>& live,
                     double l2, bool accumulate_grads) {
  CheckLevels(live);
  double value = 0.0;
  SubBatch grads;
  const int w = disc.latent_dim();
  for (int i = 0; i < kNumLevels; ++i) {
    grads.states[i] = Matrix::Zero(fake.states[i].rows(), fake.states[i].cols());
    grads.actions[i] =
        Matrix::Zero(fake.actions[i].rows(), fake.actions[i].cols());
  }
  for (int i : live) {
    nn::NetCache cache;
    const Matrix d = disc.Forward(i, fake.states[i], fake.actions[i], &cache);
    // mean log(1 - D) is the negated BCE against an all-zero target.
    const nn::LossResult bce = nn::BceLoss(d, Matrix::Zero(d.rows(), 1));
    value -= bce.value;
    if (accumulate_grads) {
      const Matrix gx = disc.Backward(i, cache, -bce.grad);
      grads.states[i] = gx.leftCols(w);
      grads.actions[i] = gx.rightCols(gx.cols() - w);
    }
  }
  value += l2 * gen.WeightSquaredNorm(live);
  if (accumulate_grads) {
    disc.ZeroGrad();
    gen.Backward(trace, m, grads, live);
    if (l2 > 0.0) {
      std::vector<nn::Parameter*> params = gen.ActionParameters();
      for (int i : live) {
        for (nn::Parameter* p : gen.LevelParameters(i)) params.push_back(p);
      }
      for (nn::Parameter* p : params) {
        if (p->is_weight) p->grad += 2.0 * l2 * p->value;
      }
    }
  }
  return value;
}

namespace {

double ProbeAccuracy(const DiscriminatorSet& disc, const SubBatch& real,
                     const SubBatch& fake, const std::vector<int>& live) {
  double total = 0.0;
  for (int i : live) {
    const Matrix dr = disc.Score(i, real.states[i], real.actions[i]);
    const Matrix df = disc.Score(i, fake.states[i], fake.actions[i]);
    const double correct = static_cast<double>((dr.array() >= 0.5).count() +
                                               (df.array() < 0.5).count());
    total += correct / static_cast<double>(dr.rows() + df.rows());
  }
  return total / static_cast<double>(live.size());
}

}  // namespace

AdversarialResult TrainAdversarial(const DaeModel& dae,
                                   const ExpertCorpus& corpus,
                                   const Ontology& ontology,
                                   const GanConfig& config, std::uint64_t seed,
                                   const PairSchedule& schedule,
                                   const ProbeCallback& on_check) {
  if (corpus.size() < 2) throw InvalidInputError("corpus is empty");
  if (dae.ontology_hash() != ontology.Hash()) {
    throw ConfigError("dae was trained for a different ontology");
  }
  const AssignmentMatrix m = BuildAssignmentMatrix(ontology);

  // Held-out rows feed the probe only.
  Rng split_rng(DeriveSeed(seed, 1));
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), split_rng);
  const int n_hold = std::clamp(
      static_cast<int>(std::lround(config.holdout_fraction * corpus.size())),
      1, std::min(config.probe_size, corpus.size() - 1));
  const std::vector<int> holdout(order.begin(), order.begin() + n_hold);
  const std::vector<int> train(order.begin() + n_hold, order.end());

  AdversarialResult result;
  Rng init_rng(DeriveSeed(seed, 2));
  result.generators = GeneratorSet(config.z_dim, dae.latent_dim(),
                                   config.hidden, m.action_dim(), init_rng);
  result.discriminators = DiscriminatorSet(dae.latent_dim(), dae.level_sizes(),
                                           config.hidden, init_rng);
  GeneratorSet& gen = result.generators;
  DiscriminatorSet& disc = result.discriminators;

  nn::AdamConfig gcfg{.learning_rate = config.generator_lr};
  nn::AdamConfig dcfg{.learning_rate = config.discriminator_lr};
  std::array<nn::Adam, kNumLevels> gen_opt, disc_opt;
  for (int i = 0; i < kNumLevels; ++i) {
    nn::AdamConfig level_cfg = gcfg;
    level_cfg.learning_rate *= config.generator_lr_scale[i];
    gen_opt[i] = nn::Adam(gen.LevelParameters(i), level_cfg);
    disc_opt[i] = nn::Adam(disc.LevelParameters(i), dcfg);
  }
  nn::Adam act_opt(gen.ActionParameters(), gcfg);

  Rng probe_rng(DeriveSeed(seed, 3));
  const SubBatch probe_real = SampleRealFrom(dae, corpus, m, holdout, probe_rng);
  const GeneratorNoise probe_noise =
      GeneratorNoise::Draw(n_hold, config.z_dim, dae.latent_dim(),
                           m.action_dim(), probe_rng);

  Rng rng(DeriveSeed(seed, 4));
  auto sample_real = [&](int n) {
    std::vector<int> rows(n);
    for (int& r : rows) r = train[UniformInt(rng, 0, static_cast<int>(train.size()) - 1)];
    return SampleRealFrom(dae, corpus, m, rows, rng);
  };

  for (std::size_t s = 0; s < schedule.stages.size(); ++s) {
    const std::vector<int>& live = schedule.stages[s];
    CheckLevels(live);
    if (live.empty()) throw ConfigError("empty stage in pair schedule");
    StageReport report;
    report.live = live;
    int stable = 0;
    double acc = 0.0;
    while (report.generator_steps < config.max_generator_steps_per_stage) {
      for (int g = 0; g < config.generator_steps_per_disc_step; ++g) {
        const GeneratorNoise noise =
            GeneratorNoise::Draw(config.batch_size, config.z_dim,
                                 dae.latent_dim(), m.action_dim(), rng);
        GeneratorSet::Trace trace;
        const SubBatch fake =
            gen.Generate(noise, m, config.gumbel_temperature, &trace);
        gen.ZeroGrad();
        const double loss = GeneratorLoss(gen, trace, fake, disc, m, live,
                                          config.generator_l2, true);
        nn::CheckFinite(loss, "generator loss in stage " +
                                  std::to_string(s + 1));
        for (int i : live) gen_opt[i].Step();
        act_opt.Step();
        ++report.generator_steps;
      }
      const SubBatch real = sample_real(config.batch_size);
      const SubBatch fake = GenerateFake(gen, config.batch_size, m,
                                         config.gumbel_temperature, rng);
      disc.ZeroGrad();
      const auto dl = DiscriminatorLoss(disc, real, fake, live, true);
      for (int i : live) {
        nn::CheckFinite(dl[i], std::string("discriminator loss (") +
                                   LevelName(i) + ") in stage " +
                                   std::to_string(s + 1));
        disc_opt[i].Step();
      }
      ++report.discriminator_steps;

      if (report.discriminator_steps % config.check_every == 0) {
        const SubBatch probe_fake =
            gen.Generate(probe_noise, m, config.gumbel_temperature);
        acc = ProbeAccuracy(disc, probe_real, probe_fake, live);
        result.probes.push_back(
            {static_cast<int>(s), report.discriminator_steps, acc});
        if (on_check) on_check(result.probes.back(), disc);
        stable = (acc >= config.probe_low && acc <= config.probe_high)
                     ? stable + 1
                     : 0;
        if (stable >= config.stable_checks &&
            report.discriminator_steps >= config.min_disc_steps_per_stage) {
          report.converged = true;
          break;
        }
      }
    }
    report.final_probe_accuracy = acc;
    if (!report.converged &&
        (std::abs(acc - 0.5) < 0.01 || acc > 0.999)) {
      throw TrainingError("discriminator collapse in stage " +
                          std::to_string(s + 1) + " (probe accuracy " +
                          std::to_string(acc) + ")");
    }
    result.stages.push_back(report);
  }
  return result;
}

Checkpoint AdversarialCheckpoint(const AdversarialResult& result,
                                 const Ontology& ontology, const DaeModel& dae,
                                 const GanConfig& config,
                                 bool include_generators) {
  Checkpoint ckpt;
  nlohmann::json stages = nlohmann::json::array();
  for (const StageReport& r : result.stages) {
    stages.push_back({{"live", r.live},
                      {"generator_steps", r.generator_steps},
                      {"discriminator_steps", r.discriminator_steps},
                      {"final_probe_accuracy", r.final_probe_accuracy},
                      {"converged", r.converged}});
  }
  ckpt.metadata() = {{"kind", "adversarial"},
                     {"ontology_hash", ontology.Hash()},
                     {"dae_hash", dae.ContentHash()},
                     {"latent_dim", dae.latent_dim()},
                     {"level_sizes", dae.level_sizes()},
                     {"has_generators", include_generators},
                     {"config", config.ToJson()},
                     {"stages", stages}};
  result.discriminators.ExportTo(ckpt);
  if (include_generators) result.generators.ExportTo(ckpt);
  return ckpt;
}

DiscriminatorSet LoadDiscriminators(const Checkpoint& ckpt,
                                    const Ontology& ontology,
                                    const DaeModel& dae) {
  const nlohmann::json& meta = ckpt.metadata();
  if (meta.value("kind", "") != "adversarial") {
    throw ConfigError("checkpoint is not an adversarial bundle");
  }
  if (meta.value("ontology_hash", "") != ontology.Hash()) {
    throw ConfigError("discriminators were trained for ontology " +
                      meta.value("ontology_hash", std::string("?")));
  }
  const std::string dae_hash = dae.ContentHash();
  if (meta.value("dae_hash", "") != dae_hash) {
    throw ConfigError("discriminators were trained against dae " +
                      meta.value("dae_hash", std::string("?")) +
                      ", loaded dae is " + dae_hash);
  }
  const GanConfig config = GanConfig::FromJson(meta.at("config"));
  Rng rng(0);
  DiscriminatorSet disc(dae.latent_dim(), dae.level_sizes(), config.hidden,
                        rng);
  disc.ImportFrom(ckpt);
  return disc;
}

}  // namespace seqreward
