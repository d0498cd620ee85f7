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

#include "seqreward/dae.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "seqreward/errors.h"
#include "seqreward/hash.h"
#include "seqreward/random.h"

namespace seqreward {

using nn::Matrix;

const char* LevelName(int level) {
  switch (level) {
    case kDomain:
      return "domain";
    case kAct:
      return "act";
    case kSlot:
      return "slot";
  }
  throw ContractViolation("bad level index");
}

nlohmann::json DaeConfig::ToJson() const {
  return {{"latent_dim", latent_dim},
          {"encoder_hidden", encoder_hidden},
          {"decoder_hidden", decoder_hidden},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"early_stop_patience", early_stop_patience},
          {"min_improvement", min_improvement},
          {"validation_fraction", validation_fraction},
          {"learning_rate", adam.learning_rate}};
}

DaeConfig DaeConfig::FromJson(const nlohmann::json& j) {
  DaeConfig c;
  try {
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
    c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.early_stop_patience =
        j.value("early_stop_patience", c.early_stop_patience);
    c.min_improvement = j.value("min_improvement", c.min_improvement);
    c.validation_fraction =
        j.value("validation_fraction", c.validation_fraction);
    c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad dae config: ") + e.what());
  }
  if (c.latent_dim < 1 || c.encoder_hidden < 1 || c.decoder_hidden < 1 ||
      c.batch_size < 1 || c.max_epochs < 0 || c.early_stop_patience < 1 ||
      c.validation_fraction <= 0.0 || c.validation_fraction >= 1.0) {
    throw ConfigError("dae config out of range");
  }
  return c;
}

Matrix DaeLatents::Concat() const {
  const Eigen::Index rows = blocks[0].rows();
  Matrix out(rows, blocks[0].cols() + blocks[1].cols() + blocks[2].cols());
  out << blocks[0], blocks[1], blocks[2];
  return out;
}

LevelLabels LabelsFor(const std::vector<DialogAction>& actions,
                      const AssignmentMatrix& m) {
  LevelLabels out;
  for (auto& l : out.labels) l.reserve(actions.size());
  for (const DialogAction& a : actions) {
    const Triple& t = m.Row(a.index);
    out.labels[kDomain].push_back(t.domain);
    out.labels[kAct].push_back(t.act);
    out.labels[kSlot].push_back(t.slot);
  }
  return out;
}

namespace {

constexpr double kClassifierInitScale = 0.01;

}  // namespace

DaeModel::DaeModel(const Ontology& ontology, const DaeConfig& config,
                   Rng& rng)
    : config_(config),
      state_dim_(ontology.state_dim()),
      level_sizes_{ontology.num_domains(), ontology.num_acts(),
                   ontology.num_slots()},
      ontology_hash_(ontology.Hash()) {
  using nn::Activation;
  for (int i = 0; i < kNumLevels; ++i) {
    encoders_[i] = nn::DenseNet(
        std::string("dae.enc_") + LevelName(i),
        {state_dim_, config_.encoder_hidden, config_.latent_dim},
        {Activation::kRelu, Activation::kIdentity}, rng);
  }
  noise_ = nn::DenseNet(
      "dae.noise",
      {state_dim_, config_.encoder_hidden, kNumLevels * config_.latent_dim},
      {Activation::kRelu, Activation::kIdentity}, rng);
  decoder_ = nn::DenseNet(
      "dae.dec",
      {kNumLevels * config_.latent_dim, config_.decoder_hidden, state_dim_},
      {Activation::kRelu, Activation::kSigmoid}, rng);
  // Small classifier weights keep the initial level posteriors near uniform.
  std::uniform_real_distribution<double> u(-kClassifierInitScale,
                                           kClassifierInitScale);
  for (int i = 0; i < kNumLevels; ++i) {
    nn::Parameter& p = classifiers_[i];
    p.name = std::string("dae.cls_") + LevelName(i);
    p.value.resize(config_.latent_dim, level_sizes_[i]);
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value(k) = u(rng);
    p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.is_weight = true;
  }
}

DaeLatents DaeModel::Encode(const Matrix& states, Rng* rng,
                            bool sample) const {
  if (states.cols() != state_dim_) {
    throw ContractViolation("dae input width " +
                            std::to_string(states.cols()) + " != " +
                            std::to_string(state_dim_));
  }
  DaeLatents out;
  for (int i = 0; i < kNumLevels; ++i) out.blocks[i] = encoders_[i].Forward(states);
  if (!sample) return out;
  if (rng == nullptr) throw ContractViolation("sampling encode needs an rng");
  const Matrix lv = LogVariance(states);
  const int w = config_.latent_dim;
  for (int i = 0; i < kNumLevels; ++i) {
    out.blocks[i] =
        nn::Reparameterize(out.blocks[i], lv.middleCols(i * w, w), *rng).sample;
  }
  return out;
}

DaeLatents DaeModel::Encode(const DialogState& state, Rng* rng,
                            bool sample) const {
  return Encode(Matrix(state.ToVector().transpose()), rng, sample);
}

Matrix DaeModel::LogVariance(const Matrix& states) const {
  return nn::ClampLogVar(noise_.Forward(states));
}

Matrix DaeModel::Reconstruct(const Matrix& latents) const {
  return decoder_.Forward(latents);
}

Matrix DaeModel::ClassifierLogits(int level, const Matrix& latent) const {
  return latent * classifiers_.at(level).value;
}

DaeLossParts DaeModel::Loss(const Matrix& states, const LevelLabels& labels,
                            Rng& rng, bool accumulate_grads) {
  Matrix eps(states.rows(), kNumLevels * config_.latent_dim);
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps(k) = StandardNormal(rng);
  return LossWithNoise(states, labels, eps, accumulate_grads);
}

DaeLossParts DaeModel::LossWithNoise(const Matrix& states,
                                     const LevelLabels& labels,
                                     const Matrix& eps,
                                     bool accumulate_grads) {
  if (states.cols() != state_dim_) {
    throw ContractViolation("dae input width mismatch");
  }
  if (labels.size() != states.rows()) {
    throw ContractViolation("dae labels do not match batch size");
  }
  const int w = config_.latent_dim;
  if (eps.rows() != states.rows() || eps.cols() != kNumLevels * w) {
    throw ContractViolation("dae noise has wrong shape");
  }

  std::array<nn::NetCache, kNumLevels> enc_cache;
  std::array<Matrix, kNumLevels> h;
  for (int i = 0; i < kNumLevels; ++i) {
    h[i] = encoders_[i].Forward(states, &enc_cache[i]);
  }
  nn::NetCache noise_cache;
  const Matrix raw_lv = noise_.Forward(states, &noise_cache);
  const Matrix lv = nn::ClampLogVar(raw_lv);

  std::array<nn::Reparameterized, kNumLevels> rep;
  Matrix z(states.rows(), kNumLevels * w);
  for (int i = 0; i < kNumLevels; ++i) {
    rep[i] = nn::ReparameterizeWithNoise(h[i], lv.middleCols(i * w, w),
                                         eps.middleCols(i * w, w));
    z.middleCols(i * w, w) = rep[i].sample;
  }
  nn::NetCache dec_cache;
  const Matrix recon = decoder_.Forward(z, &dec_cache);

  DaeLossParts parts;
  // Reconstruction sums over state bits and averages over the batch.
  nn::LossResult bce = nn::BceLoss(recon, states);
  parts.recon = bce.value * state_dim_;
  std::array<nn::LossResult, kNumLevels> ce;
  for (int i = 0; i < kNumLevels; ++i) {
    ce[i] = nn::SoftmaxCrossEntropy(
        ClassifierLogits(i, rep[i].sample), labels.labels[i]);
    parts.cls[i] = ce[i].value;
  }
  parts.total = parts.recon + parts.cls[0] + parts.cls[1] + parts.cls[2];
  if (!accumulate_grads) return parts;

  Matrix gz = decoder_.Backward(dec_cache, bce.grad * state_dim_);
  Matrix g_lv(states.rows(), kNumLevels * w);
  for (int i = 0; i < kNumLevels; ++i) {
    Matrix gs = gz.middleCols(i * w, w);
    classifiers_[i].grad += rep[i].sample.transpose() * ce[i].grad;
    gs += ce[i].grad * classifiers_[i].value.transpose();
    Matrix g_lv_i;
    Matrix gh = rep[i].Backward(gs, lv.middleCols(i * w, w), &g_lv_i);
    g_lv.middleCols(i * w, w) = g_lv_i;
    encoders_[i].Backward(enc_cache[i], gh);
  }
  noise_.Backward(noise_cache, nn::ClampLogVarGrad(raw_lv, g_lv));
  return parts;
}

void DaeModel::ZeroGrad() {
  for (nn::Parameter* p : Parameters()) p->grad.setZero();
}

std::vector<nn::Parameter*> DaeModel::Parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& e : encoders_) {
    for (nn::Parameter* p : e.Parameters()) out.push_back(p);
  }
  for (nn::Parameter* p : noise_.Parameters()) out.push_back(p);
  for (nn::Parameter* p : decoder_.Parameters()) out.push_back(p);
  for (auto& c : classifiers_) out.push_back(&c);
  return out;
}

Checkpoint DaeModel::ToCheckpoint() const {
  Checkpoint ckpt;
  ckpt.metadata() = {{"kind", "dae"},
                     {"ontology_hash", ontology_hash_},
                     {"state_dim", state_dim_},
                     {"level_sizes", level_sizes_},
                     {"config", config_.ToJson()}};
  for (const auto& e : encoders_) e.ExportTo(ckpt);
  noise_.ExportTo(ckpt);
  decoder_.ExportTo(ckpt);
  for (const auto& c : classifiers_) ckpt.PutMatrix(c.name, c.value);
  return ckpt;
}

std::string DaeModel::ContentHash() const {
  return Sha256Hex(ToCheckpoint().Serialize());
}

DaeModel DaeModel::FromCheckpoint(const Checkpoint& ckpt,
                                  const Ontology& ontology) {
  const nlohmann::json& meta = ckpt.metadata();
  if (meta.value("kind", "") != "dae") {
    throw ConfigError("checkpoint is not a dae model");
  }
  if (meta.value("ontology_hash", "") != ontology.Hash()) {
    throw ConfigError("dae checkpoint was trained for ontology " +
                      meta.value("ontology_hash", std::string("?")) +
                      ", expected " + ontology.Hash());
  }
  Rng rng(0);
  DaeModel model(ontology, DaeConfig::FromJson(meta.at("config")), rng);
  for (auto& e : model.encoders_) e.ImportFrom(ckpt);
  model.noise_.ImportFrom(ckpt);
  model.decoder_.ImportFrom(ckpt);
  for (auto& c : model.classifiers_) {
    Matrix m = ckpt.GetMatrix(c.name);
    if (m.rows() != c.value.rows() || m.cols() != c.value.cols()) {
      throw ConfigError("checkpoint array " + c.name + " has wrong shape");
    }
    c.value = std::move(m);
  }
  return model;
}

void DaeModel::Save(const std::filesystem::path& path) const {
  ToCheckpoint().Save(path);
}

DaeModel DaeModel::Load(const std::filesystem::path& path,
                        const Ontology& ontology) {
  return FromCheckpoint(Checkpoint::Load(path), ontology);
}

bool DaeModel::operator==(const DaeModel& o) const {
  if (state_dim_ != o.state_dim_ || ontology_hash_ != o.ontology_hash_ ||
      !(noise_ == o.noise_) || !(decoder_ == o.decoder_)) {
    return false;
  }
  for (int i = 0; i < kNumLevels; ++i) {
    if (!(encoders_[i] == o.encoders_[i])) return false;
    if (classifiers_[i].value != o.classifiers_[i].value) return false;
  }
  return true;
}

namespace {

Matrix RowsOf(const ExpertCorpus& corpus, const std::vector<int>& idx,
              std::size_t begin, std::size_t end) {
  Matrix out(static_cast<Eigen::Index>(end - begin),
             corpus.states.front().size());
  for (std::size_t r = begin; r < end; ++r) {
    const auto& bits = corpus.states[idx[r]].bits();
    for (std::size_t c = 0; c < bits.size(); ++c) {
      out(static_cast<Eigen::Index>(r - begin), static_cast<Eigen::Index>(c)) =
          bits[c];
    }
  }
  return out;
}

LevelLabels LabelsOf(const LevelLabels& all, const std::vector<int>& idx,
                     std::size_t begin, std::size_t end) {
  LevelLabels out;
  for (int l = 0; l < kNumLevels; ++l) {
    for (std::size_t r = begin; r < end; ++r) {
      out.labels[l].push_back(all.labels[l][idx[r]]);
    }
  }
  return out;
}

double EvalLoss(DaeModel& model, const Matrix& x, const LevelLabels& y,
                std::uint64_t seed) {
  // Fixed noise so that validation losses are comparable across epochs.
  Rng rng(seed);
  return model.Loss(x, y, rng, false).total;
}

}  // namespace

DaeTrainResult TrainDae(const ExpertCorpus& corpus, const Ontology& ontology,
                        const DaeConfig& config, std::uint64_t seed) {
  if (corpus.size() < 2) throw InvalidInputError("dae corpus is empty");
  if (corpus.states.front().size() != ontology.state_dim()) {
    throw InvalidInputError("corpus state width does not match ontology");
  }
  const AssignmentMatrix m = BuildAssignmentMatrix(ontology);
  const LevelLabels all_labels = LabelsFor(corpus.actions, m);

  DaeTrainResult result;
  Rng split_rng(DeriveSeed(seed, 1));
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), split_rng);
  const int n_val = std::max(
      1, static_cast<int>(std::lround(config.validation_fraction *
                                      corpus.size())));
  result.validation_indices.assign(order.begin(), order.begin() + n_val);
  result.train_indices.assign(order.begin() + n_val, order.end());
  std::sort(result.validation_indices.begin(), result.validation_indices.end());

  Rng init_rng(DeriveSeed(seed, 2));
  DaeModel model(ontology, config, init_rng);
  nn::Adam adam(model.Parameters(), config.adam);
  Rng noise_rng(DeriveSeed(seed, 3));
  Rng shuffle_rng(DeriveSeed(seed, 4));
  const std::uint64_t eval_seed = DeriveSeed(seed, 5);

  const auto& val = result.validation_indices;
  const Matrix x_val = RowsOf(corpus, val, 0, val.size());
  const LevelLabels y_val = LabelsOf(all_labels, val, 0, val.size());
  std::vector<int> train = result.train_indices;
  const Matrix x_train_all = RowsOf(corpus, train, 0, train.size());
  const LevelLabels y_train_all = LabelsOf(all_labels, train, 0, train.size());

  auto record = [&](DaeModel& mdl) {
    const double tl = EvalLoss(mdl, x_train_all, y_train_all, eval_seed);
    const double vl = EvalLoss(mdl, x_val, y_val, eval_seed);
    nn::CheckFinite(tl, "dae training loss");
    nn::CheckFinite(vl, "dae validation loss");
    result.train_loss.push_back(tl);
    result.validation_loss.push_back(vl);
    return vl;
  };

  double best = record(model);
  result.model = model;
  int since_improvement = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), shuffle_rng);
    for (std::size_t b = 0; b < train.size();
         b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e =
          std::min(train.size(), b + static_cast<std::size_t>(config.batch_size));
      const Matrix x = RowsOf(corpus, train, b, e);
      const LevelLabels y = LabelsOf(all_labels, train, b, e);
      model.ZeroGrad();
      const DaeLossParts parts = model.Loss(x, y, noise_rng, true);
      nn::CheckFinite(parts.total, "dae batch loss");
      adam.Step();
    }
    const double vl = record(model);
    if (vl < best - config.min_improvement) {
      best = vl;
      result.model = model;
      result.best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement >= config.early_stop_patience) {
      break;
    }
  }
  return result;
}

DaeQuality EvaluateDae(const DaeModel& model, const ExpertCorpus& corpus,
                       const AssignmentMatrix& m,
                       const std::vector<int>& indices) {
  if (indices.empty()) throw InvalidInputError("no rows to evaluate");
  const Matrix x = RowsOf(corpus, indices, 0, indices.size());
  std::vector<DialogAction> acts;
  for (int i : indices) acts.push_back(corpus.actions[i]);
  const LevelLabels y = LabelsFor(acts, m);
  const DaeLatents lat = model.Encode(x, nullptr, false);
  const Matrix recon = model.Reconstruct(lat.Concat());
  DaeQuality q;
  const Eigen::Index hits =
      ((recon.array() >= 0.5).cast<double>() == x.array()).count();
  q.reconstruction_bit_accuracy =
      static_cast<double>(hits) / static_cast<double>(x.size());
  for (int l = 0; l < kNumLevels; ++l) {
    const Matrix logits = model.ClassifierLogits(l, lat.blocks[l]);
    int correct = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index arg;
      logits.row(r).maxCoeff(&arg);
      if (arg == y.labels[l][r]) ++correct;
    }
    q.classifier_accuracy[l] =
        static_cast<double>(correct) / static_cast<double>(logits.rows());
  }
  return q;
}

double LinearProbeAccuracy(const Matrix& train_x,
                           const std::vector<int>& train_y,
                           const Matrix& test_x,
                           const std::vector<int>& test_y, int num_classes,
                           std::uint64_t seed, int epochs) {
  if (train_x.rows() != static_cast<Eigen::Index>(train_y.size()) ||
      test_x.rows() != static_cast<Eigen::Index>(test_y.size()) ||
      train_x.cols() != test_x.cols() || train_x.rows() == 0 ||
      test_x.rows() == 0) {
    throw InvalidInputError("probe inputs have inconsistent shapes");
  }
  // Standardize with training statistics so that the probe is not
  // sensitive to feature scale.
  const nn::RowVector mean = train_x.colwise().mean();
  nn::RowVector sd =
      ((train_x.rowwise() - mean).array().square().colwise().mean()).sqrt();
  sd = sd.unaryExpr([](double v) { return v < 1e-8 ? 1.0 : v; });
  const Matrix xtr =
      (train_x.rowwise() - mean).array().rowwise() / sd.array();
  const Matrix xte = (test_x.rowwise() - mean).array().rowwise() / sd.array();

  Rng rng(seed);
  nn::DenseNet probe("probe", {static_cast<int>(xtr.cols()), num_classes},
                     {nn::Activation::kIdentity}, rng);
  nn::Adam adam(probe.Parameters(), nn::AdamConfig{.learning_rate = 1e-2});
  std::vector<int> order(train_y.size());
  std::iota(order.begin(), order.end(), 0);
  constexpr int kBatch = 128;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += kBatch) {
      const std::size_t e = std::min(order.size(), b + kBatch);
      Matrix x(static_cast<Eigen::Index>(e - b), xtr.cols());
      std::vector<int> y;
      for (std::size_t r = b; r < e; ++r) {
        x.row(static_cast<Eigen::Index>(r - b)) = xtr.row(order[r]);
        y.push_back(train_y[order[r]]);
      }
      probe.ZeroGrad();
      nn::NetCache cache;
      const Matrix logits = probe.Forward(x, &cache);
      probe.Backward(cache, nn::SoftmaxCrossEntropy(logits, y).grad);
      adam.Step();
    }
  }
  const Matrix logits = probe.Forward(xte);
  int correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg;
    logits.row(r).maxCoeff(&arg);
    if (arg == test_y[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

}  // namespace seqreward
