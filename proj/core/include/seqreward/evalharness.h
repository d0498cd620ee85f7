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

#ifndef SEQREWARD_EVALHARNESS_H_
#define SEQREWARD_EVALHARNESS_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqreward/agents.h"
#include "seqreward/dialog_env.h"
#include "seqreward/ontology.h"
#include "seqreward/shaping.h"

namespace seqreward {

// Each state appears twice: with its expert action (positive) and with a
// uniformly drawn action from another domain (negative).
struct ClassifierTestSet {
  std::vector<DialogState> states;
  std::vector<int> positives;
  std::vector<int> negatives;
  int size() const { return static_cast<int>(states.size()); }
};

// Throws ConfigError when the action space has a single domain.
ClassifierTestSet BuildTestset(const ExpertCorpus& corpus,
                               const AssignmentMatrix& m, std::uint64_t seed);

enum class ScoreVariant { kDomain, kAct, kSlot, kSeqAvg, kSeqPrd };
std::string VariantName(ScoreVariant v);
const std::vector<ScoreVariant>& AllVariants();

// Per-level variants use the raw discriminator score of that level; the
// combined variants gate with (tau, b) first.
double VariantScore(ScoreVariant v, const LevelScores& y, double tau, double b);

struct TestsetScores {
  std::vector<LevelScores> positive;
  std::vector<LevelScores> negative;
};
TestsetScores ScoreTestset(const RewardEstimator& est,
                           const ClassifierTestSet& ts);
std::vector<double> VariantScores(const std::vector<LevelScores>& y,
                                  ScoreVariant v, double tau, double b);

struct ClassificationResult {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double bias_ratio = 0.0;  // true negatives / true positives
};

// score >= threshold counts as a positive prediction. Throws
// InvalidInputError unless 0 < threshold < 1.
ClassificationResult ClassificationMetrics(const std::vector<double>& positive,
                                           const std::vector<double>& negative,
                                           double threshold = 0.5);

struct ScoreHistogram {
  std::vector<double> edges;  // n_bins + 1 values on [0, 1]
  std::vector<long> counts;

  static ScoreHistogram Uniform(int n_bins);
  int num_bins() const { return static_cast<int>(counts.size()); }
  long total() const;
  // The last bin is closed on the right; scores outside [0, 1] clamp.
  void Add(double score);
  double MassFraction(int bin) const;
};

// Throws InvalidInputError when n_bins < 2.
std::pair<ScoreHistogram, ScoreHistogram> ScoreHistograms(
    const std::vector<double>& real, const std::vector<double>& fake,
    int n_bins = 100);

// Jensen-Shannon divergence in nats between epsilon-smoothed normalized
// histograms. Throws ContractViolation on mismatched edges.
double JsDivergence(const ScoreHistogram& p, const ScoreHistogram& q,
                    double epsilon = 1e-10);

// Static SVG overlay of the two histograms.
std::string HistogramSvg(const ScoreHistogram& real, const ScoreHistogram& fake,
                         const std::string& title);

struct AggregatePoint {
  std::int64_t frames = 0;
  double success_mean = 0.0, success_std = 0.0;
  double reward_mean = 0.0, reward_std = 0.0;
  double turn_mean = 0.0, turn_std = 0.0;
};

// Population mean and std per checkpoint. Throws ContractViolation when the
// curves do not share a checkpoint grid.
std::vector<AggregatePoint> AggregateRuns(
    const std::vector<LearningCurve>& curves);

// Frames at which a curve first reaches the threshold; a curve that never
// does is scored as its last frame plus one evaluation interval.
double CensoredFramesToReach(const LearningCurve& curve, double threshold);

double Median(std::vector<double> values);

// Multi-curve SVG line plot of mean success against frames.
std::string CurvesSvg(
    const std::vector<std::pair<std::string, std::vector<AggregatePoint>>>&
        series,
    const std::string& title);

}  // namespace seqreward

#endif  // SEQREWARD_EVALHARNESS_H_
