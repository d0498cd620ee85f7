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

#include "seqreward/evalharness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "seqreward/errors.h"
#include "seqreward/random.h"

namespace seqreward {

ClassifierTestSet BuildTestset(const ExpertCorpus& corpus,
                               const AssignmentMatrix& m, std::uint64_t seed) {
  std::vector<std::vector<int>> other(m.num_domains());
  for (int d = 0; d < m.num_domains(); ++d) {
    for (int a = 0; a < m.action_dim(); ++a) {
      if (m.Row(a).domain != d) other[d].push_back(a);
    }
  }
  for (int d = 0; d < m.num_domains(); ++d) {
    if (other[d].empty()) {
      throw ConfigError("no actions outside domain " + std::to_string(d) +
                        "; negatives need at least two domains");
    }
  }
  Rng rng(seed);
  ClassifierTestSet ts;
  ts.states = corpus.states;
  for (const DialogAction& a : corpus.actions) {
    const auto& pool = other[m.Row(a.index).domain];
    ts.positives.push_back(a.index);
    ts.negatives.push_back(
        pool[UniformInt(rng, 0, static_cast<int>(pool.size()) - 1)]);
  }
  return ts;
}

std::string VariantName(ScoreVariant v) {
  switch (v) {
    case ScoreVariant::kDomain:
      return "R_d";
    case ScoreVariant::kAct:
      return "R_a";
    case ScoreVariant::kSlot:
      return "R_s";
    case ScoreVariant::kSeqAvg:
      return "SeqAvg";
    case ScoreVariant::kSeqPrd:
      return "SeqPrd";
  }
  throw ContractViolation("bad score variant");
}

const std::vector<ScoreVariant>& AllVariants() {
  static const std::vector<ScoreVariant> all = {
      ScoreVariant::kDomain, ScoreVariant::kAct, ScoreVariant::kSlot,
      ScoreVariant::kSeqAvg, ScoreVariant::kSeqPrd};
  return all;
}

double VariantScore(ScoreVariant v, const LevelScores& y, double tau,
                    double b) {
  switch (v) {
    case ScoreVariant::kDomain:
      return y[kDomain];
    case ScoreVariant::kAct:
      return y[kAct];
    case ScoreVariant::kSlot:
      return y[kSlot];
    case ScoreVariant::kSeqAvg:
      return Combine(Combination::kSeqAvg, GatedRewards(y, tau, b));
    case ScoreVariant::kSeqPrd:
      return Combine(Combination::kSeqPrd, GatedRewards(y, tau, b));
  }
  throw ContractViolation("bad score variant");
}

TestsetScores ScoreTestset(const RewardEstimator& est,
                           const ClassifierTestSet& ts) {
  const nn::Matrix x = StackStates(ts.states);
  const nn::Matrix yp = est.ScoreLevels(x, ts.positives);
  const nn::Matrix yn = est.ScoreLevels(x, ts.negatives);
  TestsetScores out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    out.positive.push_back({yp(r, 0), yp(r, 1), yp(r, 2)});
    out.negative.push_back({yn(r, 0), yn(r, 1), yn(r, 2)});
  }
  return out;
}

std::vector<double> VariantScores(const std::vector<LevelScores>& y,
                                  ScoreVariant v, double tau, double b) {
  std::vector<double> out;
  out.reserve(y.size());
  for (const LevelScores& s : y) out.push_back(VariantScore(v, s, tau, b));
  return out;
}

ClassificationResult ClassificationMetrics(const std::vector<double>& positive,
                                           const std::vector<double>& negative,
                                           double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidInputError("threshold must lie in (0, 1)");
  }
  ClassificationResult r;
  for (double s : positive) (s >= threshold ? r.tp : r.fn)++;
  for (double s : negative) (s >= threshold ? r.fp : r.tn)++;
  const double total = static_cast<double>(r.tp + r.fp + r.tn + r.fn);
  r.accuracy = total > 0 ? (r.tp + r.tn) / total : 0.0;
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  r.bias_ratio = r.tp > 0 ? static_cast<double>(r.tn) / r.tp
                          : std::numeric_limits<double>::infinity();
  return r;
}

ScoreHistogram ScoreHistogram::Uniform(int n_bins) {
  if (n_bins < 2) throw InvalidInputError("histograms need at least 2 bins");
  ScoreHistogram h;
  for (int i = 0; i <= n_bins; ++i) {
    h.edges.push_back(static_cast<double>(i) / n_bins);
  }
  h.counts.assign(n_bins, 0);
  return h;
}

long ScoreHistogram::total() const {
  long t = 0;
  for (long c : counts) t += c;
  return t;
}

void ScoreHistogram::Add(double score) {
  const double s = std::clamp(score, edges.front(), edges.back());
  auto it = std::upper_bound(edges.begin(), edges.end(), s);
  int bin = static_cast<int>(it - edges.begin()) - 1;
  bin = std::clamp(bin, 0, num_bins() - 1);
  ++counts[bin];
}

double ScoreHistogram::MassFraction(int bin) const {
  const long t = total();
  return t > 0 ? static_cast<double>(counts.at(bin)) / t : 0.0;
}

std::pair<ScoreHistogram, ScoreHistogram> ScoreHistograms(
    const std::vector<double>& real, const std::vector<double>& fake,
    int n_bins) {
  ScoreHistogram r = ScoreHistogram::Uniform(n_bins);
  ScoreHistogram f = ScoreHistogram::Uniform(n_bins);
  for (double s : real) r.Add(s);
  for (double s : fake) f.Add(s);
  return {r, f};
}

double JsDivergence(const ScoreHistogram& p, const ScoreHistogram& q,
                    double epsilon) {
  if (p.edges != q.edges) throw ContractViolation("histogram edges differ");
  auto normalized = [epsilon](const ScoreHistogram& h) {
    const double t = static_cast<double>(h.total());
    std::vector<double> v;
    double sum = 0.0;
    for (long c : h.counts) {
      v.push_back((t > 0 ? c / t : 0.0) + epsilon);
      sum += v.back();
    }
    for (double& x : v) x /= sum;
    return v;
  };
  const std::vector<double> a = normalized(p);
  const std::vector<double> b = normalized(q);
  double js = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double m = 0.5 * (a[i] + b[i]);
    js += 0.5 * a[i] * std::log(a[i] / m) + 0.5 * b[i] * std::log(b[i] / m);
  }
  return std::max(0.0, js);
}

namespace {

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string HistogramSvg(const ScoreHistogram& real, const ScoreHistogram& fake,
                         const std::string& title) {
  constexpr double kW = 640, kH = 360, kPad = 40;
  const int n = real.num_bins();
  double peak = 0.0;
  for (int i = 0; i < n; ++i) {
    peak = std::max({peak, real.MassFraction(i), fake.MassFraction(i)});
  }
  if (peak <= 0.0) peak = 1.0;
  const double bw = (kW - 2 * kPad) / n;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kPad << "\" y=\"24\" font-family=\"sans-serif\" "
      << "font-size=\"14\">" << title << "</text>\n";
  auto bars = [&](const ScoreHistogram& h, const char* color) {
    for (int i = 0; i < n; ++i) {
      const double height = h.MassFraction(i) / peak * (kH - 2 * kPad);
      if (height <= 0.0) continue;
      svg << "<rect x=\"" << Fmt(kPad + i * bw) << "\" y=\""
          << Fmt(kH - kPad - height) << "\" width=\"" << Fmt(bw)
          << "\" height=\"" << Fmt(height) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.5\"/>\n";
    }
  };
  bars(real, "#1f77b4");
  bars(fake, "#d62728");
  svg << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\""
      << kW - kPad << "\" y2=\"" << kH - kPad << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << kPad << "\" y=\"" << kH - 15
      << "\" font-family=\"sans-serif\" font-size=\"12\">0</text>\n"
      << "<text x=\"" << kW - kPad << "\" y=\"" << kH - 15
      << "\" font-family=\"sans-serif\" font-size=\"12\">1</text>\n"
      << "<text x=\"" << kW - 160 << "\" y=\"24\" font-family=\"sans-serif\" "
      << "font-size=\"12\" fill=\"#1f77b4\">real</text>\n"
      << "<text x=\"" << kW - 110 << "\" y=\"24\" font-family=\"sans-serif\" "
      << "font-size=\"12\" fill=\"#d62728\">fake</text>\n"
      << "</svg>\n";
  return svg.str();
}

std::vector<AggregatePoint> AggregateRuns(
    const std::vector<LearningCurve>& curves) {
  if (curves.empty()) throw ContractViolation("no curves to aggregate");
  const std::size_t n = curves.front().points.size();
  for (const LearningCurve& c : curves) {
    if (c.points.size() != n) throw ContractViolation("curve grids differ");
    for (std::size_t i = 0; i < n; ++i) {
      if (c.points[i].frames != curves.front().points[i].frames) {
        throw ContractViolation("curve grids differ");
      }
    }
  }
  std::vector<AggregatePoint> out(n);
  const double k = static_cast<double>(curves.size());
  for (std::size_t i = 0; i < n; ++i) {
    AggregatePoint& a = out[i];
    a.frames = curves.front().points[i].frames;
    double s = 0, s2 = 0, r = 0, r2 = 0, t = 0, t2 = 0;
    for (const LearningCurve& c : curves) {
      const CurvePoint& p = c.points[i];
      s += p.success_rate;
      s2 += p.success_rate * p.success_rate;
      r += p.reward_score;
      r2 += p.reward_score * p.reward_score;
      t += p.avg_turn;
      t2 += p.avg_turn * p.avg_turn;
    }
    auto sd = [k](double sum, double sum2) {
      return std::sqrt(std::max(0.0, sum2 / k - (sum / k) * (sum / k)));
    };
    a.success_mean = s / k;
    a.success_std = sd(s, s2);
    a.reward_mean = r / k;
    a.reward_std = sd(r, r2);
    a.turn_mean = t / k;
    a.turn_std = sd(t, t2);
  }
  return out;
}

double CensoredFramesToReach(const LearningCurve& curve, double threshold) {
  if (auto f = curve.FramesToReach(threshold)) return static_cast<double>(*f);
  const auto& pts = curve.points;
  if (pts.empty()) throw ContractViolation("empty learning curve");
  const std::int64_t step =
      pts.size() >= 2 ? pts.back().frames - pts[pts.size() - 2].frames : 0;
  return static_cast<double>(pts.back().frames + step);
}

double Median(std::vector<double> values) {
  if (values.empty()) throw InvalidInputError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string CurvesSvg(
    const std::vector<std::pair<std::string, std::vector<AggregatePoint>>>&
        series,
    const std::string& title) {
  constexpr double kW = 720, kH = 400, kPad = 50;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                  "#bcbd22"};
  std::int64_t max_frames = 1;
  for (const auto& s : series) {
    if (!s.second.empty()) max_frames = std::max(max_frames, s.second.back().frames);
  }
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kPad << "\" y=\"24\" font-family=\"sans-serif\" "
      << "font-size=\"14\">" << title << "</text>\n"
      << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\""
      << kW - kPad << "\" y2=\"" << kH - kPad << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad
      << "\" y2=\"" << kH - kPad << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % 9];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const AggregatePoint& p : series[i].second) {
      const double x = kPad + (kW - 2 * kPad) * p.frames / double(max_frames);
      const double y = kH - kPad - (kH - 2 * kPad) * p.success_mean;
      svg << Fmt(x) << "," << Fmt(y) << " ";
    }
    svg << "\"/>\n<text x=\"" << kW - kPad - 120 << "\" y=\""
        << kPad + 16 * i << "\" font-family=\"sans-serif\" font-size=\"12\" "
        << "fill=\"" << color << "\">" << series[i].first << "</text>\n";
  }
  svg << "<text x=\"" << kPad << "\" y=\"" << kH - 15
      << "\" font-family=\"sans-serif\" font-size=\"12\">frames 0 to "
      << max_frames << "; success rate 0 to 1</text>\n</svg>\n";
  return svg.str();
}

}  // namespace seqreward
