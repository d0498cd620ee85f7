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

#ifndef SEQREWARD_NEURAL_H_
#define SEQREWARD_NEURAL_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "seqreward/random.h"

namespace seqreward {

class Checkpoint;

namespace nn {

// Batches are row-major in meaning: one example per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kProbEpsilon = 1e-7;
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

enum class Activation { kIdentity, kRelu, kSigmoid, kSoftmax };

// A named trainable array with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool is_weight = false;  // l2 decay applies to weights only
};

// Intermediates recorded by DenseNet::Forward for the matching Backward.
struct NetCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> outputs;
};

// Stack of affine layers, each followed by an activation.
class DenseNet {
 public:
  DenseNet() = default;

  // sizes = {in, h1, ..., out}; activations has sizes.size() - 1 entries.
  // Weights are Glorot-uniform, biases zero.
  DenseNet(std::string name, std::vector<int> sizes,
           std::vector<Activation> activations, Rng& rng);

  const std::string& name() const { return name_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  int num_layers() const { return static_cast<int>(activations_.size()); }

  // Throws ContractViolation when x.cols() != input_size().
  Matrix Forward(const Matrix& x, NetCache* cache = nullptr) const;

  // Accumulates parameter gradients for dL/d(output) = grad_out and returns
  // dL/d(input).
  Matrix Backward(const NetCache& cache, const Matrix& grad_out);

  void ZeroGrad();
  std::vector<Parameter*> Parameters();
  std::vector<const Parameter*> Parameters() const;

  Parameter& weight(int layer) { return weights_.at(layer); }
  Parameter& bias(int layer) { return biases_.at(layer); }
  const Parameter& weight(int layer) const { return weights_.at(layer); }
  const Parameter& bias(int layer) const { return biases_.at(layer); }

  // Sum of squared weight entries (biases excluded).
  double WeightSquaredNorm() const;

  void ExportTo(Checkpoint& ckpt) const;
  // Throws ConfigError on a missing array or shape mismatch.
  void ImportFrom(const Checkpoint& ckpt);

  bool operator==(const DenseNet& o) const;

 private:
  std::string name_;
  std::vector<int> sizes_;
  std::vector<Activation> activations_;
  std::vector<Parameter> weights_;  // in x out
  std::vector<Parameter> biases_;   // 1 x out
};

Matrix Sigmoid(const Matrix& x);
double Sigmoid(double x);
Matrix SoftmaxRows(const Matrix& logits);

struct LossResult {
  double value = 0.0;
  Matrix grad;  // d value / d input, same shape as the input
};

// Mean over all elements of -[t log p + (1-t) log(1-p)], with p clamped to
// [1e-7, 1 - 1e-7]. The gradient is zero where clamping is active.
LossResult BceLoss(const Matrix& pred, const Matrix& target);

// Mean over rows of -log softmax(logits_row)[label]. Throws
// ContractViolation for an out-of-range label.
LossResult SoftmaxCrossEntropy(const Matrix& logits,
                               const std::vector<int>& labels);

// h + exp(log_var / 2) * eps with eps ~ N(0, I). Gradients flow to h and
// log_var only.
struct Reparameterized {
  Matrix sample;
  Matrix eps;
  Matrix Backward(const Matrix& grad_out, const Matrix& log_var,
                  Matrix* grad_log_var) const;
};
Reparameterized Reparameterize(const Matrix& h, const Matrix& log_var,
                               Rng& rng);
Reparameterized ReparameterizeWithNoise(const Matrix& h, const Matrix& log_var,
                                        const Matrix& eps);

// Clamps log-variance to [kLogVarMin, kLogVarMax]; the matching gradient
// mask is 1 inside the range and 0 outside.
Matrix ClampLogVar(const Matrix& log_var);
Matrix ClampLogVarGrad(const Matrix& log_var, const Matrix& grad);

// Straight-through Gumbel-softmax: forward value is the exact one-hot
// argmax of (logits + g) per row, backward goes through the soft sample
// softmax((logits + g) / temperature).
struct GumbelSample {
  Matrix hard;
  Matrix soft;
  double temperature = 1.0;
  // dL/dlogits given dL/d(hard), using the soft Jacobian.
  Matrix Backward(const Matrix& grad_out) const;
};
GumbelSample StGumbelSoftmax(const Matrix& logits, double temperature,
                             Rng& rng);
GumbelSample StGumbelSoftmaxWithNoise(const Matrix& logits, double temperature,
                                      const Matrix& gumbel);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2 = 0.0;
};

// Adaptive-moment optimizer with bias correction over a fixed parameter
// list. Parameters must outlive the optimizer.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamConfig config);

  // Applies one update from the accumulated gradients. Throws TrainingError
  // naming the parameter when a gradient is not finite.
  void Step();

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  void ExportTo(Checkpoint& ckpt, const std::string& prefix) const;
  void ImportFrom(const Checkpoint& ckpt, const std::string& prefix);

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamConfig config_;
  std::int64_t step_ = 0;
};

// Throws TrainingError when value is NaN or infinite.
void CheckFinite(double value, const std::string& what);

}  // namespace nn
}  // namespace seqreward

#endif  // SEQREWARD_NEURAL_H_
