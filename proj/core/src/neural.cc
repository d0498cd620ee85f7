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

#include "seqreward/neural.h"

#include <cmath>
#include <limits>

#include "seqreward/checkpoint.h"
#include "seqreward/errors.h"

namespace seqreward::nn {
namespace {

Matrix Activate(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kSigmoid:
      return Sigmoid(z);
    case Activation::kSoftmax:
      return SoftmaxRows(z);
  }
  return z;
}

// dL/dz from dL/dy and the activation output y.
Matrix ActivationBackward(Activation act, const Matrix& y, const Matrix& g) {
  switch (act) {
    case Activation::kIdentity:
      return g;
    case Activation::kRelu:
      return (y.array() > 0.0).select(g, 0.0);
    case Activation::kSigmoid:
      return (g.array() * y.array() * (1.0 - y.array())).matrix();
    case Activation::kSoftmax: {
      Vector dot = (g.array() * y.array()).rowwise().sum();
      return (y.array() * (g.colwise() - dot).array()).matrix();
    }
  }
  return g;
}

}  // namespace

DenseNet::DenseNet(std::string name, std::vector<int> sizes,
                   std::vector<Activation> activations, Rng& rng)
    : name_(std::move(name)),
      sizes_(std::move(sizes)),
      activations_(std::move(activations)) {
  if (sizes_.size() < 2 || activations_.size() != sizes_.size() - 1) {
    throw ContractViolation("DenseNet " + name_ +
                            ": need one activation per layer");
  }
  for (int s : sizes_) {
    if (s <= 0) throw ContractViolation("DenseNet " + name_ + ": bad size");
  }
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Parameter w{name_ + ".l" + std::to_string(l) + ".weight",
                Matrix(in, out), Matrix::Zero(in, out), true};
    for (int r = 0; r < in; ++r)
      for (int c = 0; c < out; ++c) w.value(r, c) = dist(rng);
    Parameter b{name_ + ".l" + std::to_string(l) + ".bias",
                Matrix::Zero(1, out), Matrix::Zero(1, out), false};
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
}

Matrix DenseNet::Forward(const Matrix& x, NetCache* cache) const {
  if (x.cols() != input_size()) {
    throw ContractViolation("DenseNet " + name_ + ": input has " +
                            std::to_string(x.cols()) + " columns, expected " +
                            std::to_string(input_size()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Matrix h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = h * weights_[l].value;
    z.rowwise() += biases_[l].value.row(0);
    Matrix y = Activate(activations_[l], z);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->outputs.push_back(y);
    }
    h = std::move(y);
  }
  return h;
}

Matrix DenseNet::Backward(const NetCache& cache, const Matrix& grad_out) {
  if (static_cast<int>(cache.inputs.size()) != num_layers()) {
    throw ContractViolation("DenseNet " + name_ + ": backward without forward");
  }
  Matrix g = grad_out;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Matrix& y = cache.outputs[l];
    if (g.rows() != y.rows() || g.cols() != y.cols()) {
      throw ContractViolation("DenseNet " + name_ + ": gradient shape mismatch");
    }
    Matrix gz = ActivationBackward(activations_[l], y, g);
    weights_[l].grad.noalias() += cache.inputs[l].transpose() * gz;
    biases_[l].grad.row(0) += gz.colwise().sum();
    if (l > 0) {
      g = gz * weights_[l].value.transpose();
    } else {
      return gz * weights_[l].value.transpose();
    }
  }
  return g;
}

void DenseNet::ZeroGrad() {
  for (auto& w : weights_) w.grad.setZero();
  for (auto& b : biases_) b.grad.setZero();
}

std::vector<Parameter*> DenseNet::Parameters() {
  std::vector<Parameter*> out;
  for (int l = 0; l < num_layers(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Parameter*> DenseNet::Parameters() const {
  std::vector<const Parameter*> out;
  for (int l = 0; l < num_layers(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

double DenseNet::WeightSquaredNorm() const {
  double total = 0.0;
  for (const auto& w : weights_) total += w.value.squaredNorm();
  return total;
}

void DenseNet::ExportTo(Checkpoint& ckpt) const {
  for (const Parameter* p : Parameters()) ckpt.PutMatrix(p->name, p->value);
}

void DenseNet::ImportFrom(const Checkpoint& ckpt) {
  for (Parameter* p : Parameters()) {
    Matrix m = ckpt.GetMatrix(p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw ConfigError("checkpoint array " + p->name + " has wrong shape");
    }
    p->value = std::move(m);
    p->grad.setZero();
  }
}

bool DenseNet::operator==(const DenseNet& o) const {
  if (sizes_ != o.sizes_ || activations_ != o.activations_) return false;
  for (int l = 0; l < num_layers(); ++l) {
    if (weights_[l].value != o.weights_[l].value ||
        biases_[l].value != o.biases_[l].value) {
      return false;
    }
  }
  return true;
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix Sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return Sigmoid(v); });
}

Matrix SoftmaxRows(const Matrix& logits) {
  Vector max = logits.rowwise().maxCoeff();
  Matrix e = (logits.colwise() - max).array().exp().matrix();
  Vector sum = e.rowwise().sum();
  return e.array().colwise() / sum.array();
}

LossResult BceLoss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ContractViolation("bce: prediction/target shape mismatch");
  }
  const double n = static_cast<double>(pred.size());
  LossResult r;
  r.grad.resize(pred.rows(), pred.cols());
  double total = 0.0;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      const double raw = pred(i, j);
      const double p = std::clamp(raw, kProbEpsilon, 1.0 - kProbEpsilon);
      const double t = target(i, j);
      total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
      const bool clamped = raw != p;
      r.grad(i, j) = clamped ? 0.0 : (-t / p + (1.0 - t) / (1.0 - p)) / n;
    }
  }
  r.value = total / n;
  return r;
}

LossResult SoftmaxCrossEntropy(const Matrix& logits,
                               const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw ContractViolation("softmax_ce: one label per row required");
  }
  const double n = static_cast<double>(logits.rows());
  LossResult r;
  r.grad = SoftmaxRows(logits);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= logits.cols()) {
      throw ContractViolation("softmax_ce: label " + std::to_string(y) +
                              " out of range");
    }
    const double max = logits.row(i).maxCoeff();
    const double lse =
        max + std::log((logits.row(i).array() - max).exp().sum());
    total += lse - logits(i, y);
    r.grad(i, y) -= 1.0;
  }
  r.grad /= n;
  r.value = total / n;
  return r;
}

Reparameterized ReparameterizeWithNoise(const Matrix& h, const Matrix& log_var,
                                        const Matrix& eps) {
  if (h.rows() != log_var.rows() || h.cols() != log_var.cols() ||
      eps.rows() != h.rows() || eps.cols() != h.cols()) {
    throw ContractViolation("reparameterize: shape mismatch");
  }
  Reparameterized r;
  r.eps = eps;
  r.sample = h.array() + (0.5 * log_var.array()).exp() * eps.array();
  return r;
}

Reparameterized Reparameterize(const Matrix& h, const Matrix& log_var,
                               Rng& rng) {
  Matrix eps(h.rows(), h.cols());
  for (Eigen::Index j = 0; j < eps.cols(); ++j)
    for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = StandardNormal(rng);
  return ReparameterizeWithNoise(h, log_var, eps);
}

Matrix Reparameterized::Backward(const Matrix& grad_out, const Matrix& log_var,
                                 Matrix* grad_log_var) const {
  if (grad_log_var) {
    *grad_log_var = (grad_out.array() * eps.array() * 0.5 *
                     (0.5 * log_var.array()).exp())
                        .matrix();
  }
  return grad_out;
}

Matrix ClampLogVar(const Matrix& log_var) {
  return log_var.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
}

Matrix ClampLogVarGrad(const Matrix& log_var, const Matrix& grad) {
  return (log_var.array() < kLogVarMin || log_var.array() > kLogVarMax)
      .select(0.0, grad);
}

GumbelSample StGumbelSoftmaxWithNoise(const Matrix& logits, double temperature,
                                      const Matrix& gumbel) {
  if (!(temperature > 0.0)) {
    throw ContractViolation("gumbel softmax temperature must be positive");
  }
  if (gumbel.rows() != logits.rows() || gumbel.cols() != logits.cols()) {
    throw ContractViolation("gumbel softmax: noise shape mismatch");
  }
  GumbelSample s;
  s.temperature = temperature;
  Matrix perturbed = logits + gumbel;
  s.soft = SoftmaxRows(perturbed / temperature);
  s.hard = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg;
    perturbed.row(i).maxCoeff(&arg);
    s.hard(i, arg) = 1.0;
  }
  return s;
}

GumbelSample StGumbelSoftmax(const Matrix& logits, double temperature,
                             Rng& rng) {
  Matrix g(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      double u = Uniform01(rng);
      u = std::clamp(u, 1e-20, 1.0 - 1e-16);
      g(i, j) = -std::log(-std::log(u));
    }
  }
  return StGumbelSoftmaxWithNoise(logits, temperature, g);
}

Matrix GumbelSample::Backward(const Matrix& grad_out) const {
  Vector dot = (grad_out.array() * soft.array()).rowwise().sum();
  return (soft.array() * (grad_out.colwise() - dot).array() / temperature)
      .matrix();
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::Step() {
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.grad.allFinite()) {
      throw TrainingError("non-finite gradient in parameter " + p.name);
    }
    Matrix g = p.grad;
    if (config_.l2 > 0.0 && p.is_weight) g += config_.l2 * p.value;
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseAbs2();
    p.value.array() -= config_.learning_rate * (m_[i].array() / c1) /
                       ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

void Adam::ExportTo(Checkpoint& ckpt, const std::string& prefix) const {
  for (size_t i = 0; i < params_.size(); ++i) {
    ckpt.PutMatrix(prefix + params_[i]->name + ".m", m_[i]);
    ckpt.PutMatrix(prefix + params_[i]->name + ".v", v_[i]);
  }
  Matrix step(1, 1);
  step(0, 0) = static_cast<double>(step_);
  ckpt.PutMatrix(prefix + "step", step);
}

void Adam::ImportFrom(const Checkpoint& ckpt, const std::string& prefix) {
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i] = ckpt.GetMatrix(prefix + params_[i]->name + ".m");
    v_[i] = ckpt.GetMatrix(prefix + params_[i]->name + ".v");
  }
  step_ = static_cast<std::int64_t>(ckpt.GetMatrix(prefix + "step")(0, 0));
}

void CheckFinite(double value, const std::string& what) {
  if (!std::isfinite(value)) {
    throw TrainingError("non-finite value in " + what);
  }
}

}  // namespace seqreward::nn
