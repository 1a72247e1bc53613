#include "membench/riskmeter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "membench/error.hpp"

namespace membench::risk {

double overfitting_level(double train_acc, double test_acc) {
  if (!(train_acc >= 0.0 && train_acc <= 1.0 && test_acc >= 0.0 && test_acc <= 1.0)) {
    throw InvalidInput("accuracies must lie in [0, 1]");
  }
  return train_acc - test_acc;
}

std::vector<ClassGap> overfitting_per_class(std::span<const int> train_labels, std::span<const int> train_preds,
                                            std::span<const int> test_labels, std::span<const int> test_preds,
                                            std::size_t num_classes) {
  if (train_labels.size() != train_preds.size() || test_labels.size() != test_preds.size()) {
    throw InvalidInput("labels and predictions differ in length");
  }
  auto tally = [num_classes](std::span<const int> labels, std::span<const int> preds) {
    std::vector<std::size_t> total(num_classes, 0), hit(num_classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) throw IndexError("label out of range");
      const auto c = static_cast<std::size_t>(labels[i]);
      ++total[c];
      hit[c] += preds[i] == labels[i] ? 1 : 0;
    }
    return std::pair{total, hit};
  };
  const auto [tr_total, tr_hit] = tally(train_labels, train_preds);
  const auto [te_total, te_hit] = tally(test_labels, test_preds);
  std::vector<ClassGap> out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (tr_total[c] == 0 || te_total[c] == 0) continue;
    ClassGap g;
    g.label = static_cast<int>(c);
    g.train_accuracy = static_cast<double>(tr_hit[c]) / static_cast<double>(tr_total[c]);
    g.test_accuracy = static_cast<double>(te_hit[c]) / static_cast<double>(te_total[c]);
    g.gap = g.train_accuracy - g.test_accuracy;
    out.push_back(g);
  }
  return out;
}

const char* score_metric_name(ScoreMetric m) {
  return m == ScoreMetric::entropy ? "entropy" : "cross_entropy";
}

double score_of(ScoreMetric metric, const attacks::Posteriors& p, int y) {
  return metric == ScoreMetric::entropy ? attacks::entropy(p) : nn::cross_entropy(p, y);
}

std::vector<double> shared_edges(std::span<const double> a, std::span<const double> b, std::size_t bins) {
  if (bins < 2) throw InvalidInput("need at least 2 bins");
  if (a.empty() && b.empty()) throw InvalidInput("no scores to bin");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (auto s : {a, b}) {
    for (double v : s) {
      if (!std::isfinite(v)) throw InvalidInput("non-finite score");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  edges.back() = hi;
  return edges;
}

Histogram histogram(std::span<const double> scores, std::vector<double> edges) {
  if (edges.size() < 3) throw InvalidInput("need at least 2 bins");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw InvalidInput("bin edges must be strictly increasing");
  }
  if (scores.empty()) throw InvalidInput("no scores to bin");
  Histogram h;
  h.n = scores.size();
  h.masses.assign(edges.size() - 1, 0.0);
  for (double v : scores) {
    if (!(v >= edges.front() && v <= edges.back())) throw InvalidInput("score outside bin edges");
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    auto bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    bin = std::min(bin, h.masses.size() - 1);
    h.masses[bin] += 1.0;
  }
  for (auto& m : h.masses) m /= static_cast<double>(h.n);
  h.edges = std::move(edges);
  return h;
}

namespace {

std::vector<double> scores_for(const attacks::PosteriorOracle& oracle, std::span<const nn::Tensor> samples,
                               std::span<const int> labels, ScoreMetric metric) {
  if (samples.size() != labels.size()) throw InvalidInput("samples and labels differ in length");
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.push_back(score_of(metric, oracle(samples[i]), labels[i]));
  return out;
}

std::vector<double> scores_for(const attacks::PosteriorOracle& oracle, const attacks::SampleSet& set,
                               ScoreMetric metric) {
  std::vector<double> out;
  out.reserve(set.indices.size());
  for (auto i : set.indices) out.push_back(score_of(metric, oracle(set.dataset.samples[i]), set.dataset.labels[i]));
  return out;
}

}  // namespace

ScoreDistribution score_distribution(const attacks::PosteriorOracle& oracle, std::span<const nn::Tensor> samples,
                                     std::span<const int> labels, ScoreMetric metric, std::size_t bins) {
  const auto scores = scores_for(oracle, samples, labels, metric);
  return {metric, histogram(scores, shared_edges(scores, {}, bins))};
}

DistributionPair score_distributions(const attacks::PosteriorOracle& oracle, const attacks::SampleSet& members,
                                     const attacks::SampleSet& nonmembers, ScoreMetric metric, std::size_t bins) {
  const auto ms = scores_for(oracle, members, metric);
  const auto ns = scores_for(oracle, nonmembers, metric);
  const auto edges = shared_edges(ms, ns, bins);
  return {{metric, histogram(ms, edges)}, {metric, histogram(ns, edges)}};
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw InvalidInput("distributions must have the same nonzero length");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw InvalidInput("negative mass");
    const double m = 0.5 * (p[i] + q[i]);
    const double a = p[i] > 0.0 ? p[i] * std::log2(p[i] / m) : 0.0;
    const double b = q[i] > 0.0 ? q[i] * std::log2(q[i] / m) : 0.0;
    d += 0.5 * (a + b);
  }
  return std::clamp(d, 0.0, 1.0);
}

double js_distance(std::span<const double> p, std::span<const double> q) {
  return std::sqrt(js_divergence(p, q));
}

double js_distance(const Histogram& p, const Histogram& q) {
  if (p.edges != q.edges) throw InvalidInput("histograms do not share bin edges");
  return js_distance(p.masses, q.masses);
}

double js_distance(const ScoreDistribution& p, const ScoreDistribution& q) {
  if (p.metric != q.metric) throw InvalidInput("distributions use different score metrics");
  return js_distance(p.histogram, q.histogram);
}

namespace {

struct Moments {
  double sxx = 0.0, syy = 0.0, sxy = 0.0, mx = 0.0, my = 0.0;
};

Moments moments(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidInput("xs and ys differ in length");
  if (xs.size() < 3) throw InvalidInput("need at least 3 points");
  Moments m;
  const auto n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    m.mx += xs[i];
    m.my += ys[i];
  }
  m.mx /= n;
  m.my /= n;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - m.mx, dy = ys[i] - m.my;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  if (!(m.sxx > 0.0)) throw DegenerateInput("xs have zero variance");
  return m;
}

}  // namespace

PearsonResult pearson(std::span<const double> xs, std::span<const double> ys) {
  const auto m = moments(xs, ys);
  if (!(m.syy > 0.0)) return {0.0, true};
  return {std::clamp(m.sxy / std::sqrt(m.sxx * m.syy), -1.0, 1.0), false};
}

Calibration fit_line(std::span<const double> xs, std::span<const double> ys) {
  const auto m = moments(xs, ys);
  Calibration c;
  c.slope = m.sxy / m.sxx;
  c.intercept = m.my - c.slope * m.mx;
  c.r = pearson(xs, ys).r;
  return c;
}

Calibration calibration_preset(const std::string& name) {
  if (name == "sorted") return kSortedPreset;
  if (name == "posterior_label") return kPosteriorLabelPreset;
  throw ConfigError("unknown calibration preset '" + name + "'");
}

double estimate_risk(double js, const Calibration& cal) {
  return std::clamp(cal.slope * js + cal.intercept, 0.5, 1.0);
}

}  // namespace membench::risk
