#pragma once

#include <span>
#include <string>
#include <vector>

#include "membench/attacks.hpp"

namespace membench::risk {

double overfitting_level(double train_acc, double test_acc);

struct ClassGap {
  int label = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double gap = 0.0;

  bool operator==(const ClassGap&) const = default;
};

// Class-conditional overfitting; classes absent from either side are skipped.
std::vector<ClassGap> overfitting_per_class(std::span<const int> train_labels, std::span<const int> train_preds,
                                            std::span<const int> test_labels, std::span<const int> test_preds,
                                            std::size_t num_classes);

enum class ScoreMetric { entropy, cross_entropy };

const char* score_metric_name(ScoreMetric m);

struct Histogram {
  std::vector<double> edges;   // bins + 1, strictly increasing
  std::vector<double> masses;  // sums to 1
  std::size_t n = 0;
};

struct ScoreDistribution {
  ScoreMetric metric = ScoreMetric::entropy;
  Histogram histogram;
};

inline constexpr std::size_t kDefaultBins = 100;

double score_of(ScoreMetric metric, const attacks::Posteriors& p, int y);

// bins + 1 equally spaced edges over the pooled range of both score sets. A
// zero-width range is widened by 0.5 on each side.
std::vector<double> shared_edges(std::span<const double> a, std::span<const double> b, std::size_t bins);

// Last bin is closed on the right; values outside the edges are an error.
Histogram histogram(std::span<const double> scores, std::vector<double> edges);

// Single-set distribution over that set's own range.
ScoreDistribution score_distribution(const attacks::PosteriorOracle& oracle, std::span<const nn::Tensor> samples,
                                     std::span<const int> labels, ScoreMetric metric, std::size_t bins = kDefaultBins);

struct DistributionPair {
  ScoreDistribution members;
  ScoreDistribution nonmembers;
};

// Member and non-member distributions over shared edges.
DistributionPair score_distributions(const attacks::PosteriorOracle& oracle, const attacks::SampleSet& members,
                                     const attacks::SampleSet& nonmembers, ScoreMetric metric,
                                     std::size_t bins = kDefaultBins);

// Square root of the base-2 Jensen-Shannon divergence. Masses may be passed
// directly; histograms must share edges.
double js_divergence(std::span<const double> p, std::span<const double> q);
double js_distance(std::span<const double> p, std::span<const double> q);
double js_distance(const Histogram& p, const Histogram& q);
double js_distance(const ScoreDistribution& p, const ScoreDistribution& q);

struct PearsonResult {
  double r = 0.0;
  bool degenerate = false;  // ys constant; r reported as 0
};

// Needs >= 3 points; zero variance in xs throws DegenerateInput.
PearsonResult pearson(std::span<const double> xs, std::span<const double> ys);

struct Calibration {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;

  bool operator==(const Calibration&) const = default;
};

Calibration fit_line(std::span<const double> xs, std::span<const double> ys);

// Reference calibrations for sorted-posterior and posterior+label attacks.
inline constexpr Calibration kSortedPreset{0.716, 0.416, 0.996};
inline constexpr Calibration kPosteriorLabelPreset{0.731, 0.415, 0.984};

Calibration calibration_preset(const std::string& name);

// clamp(slope * js + intercept, 0.5, 1.0)
double estimate_risk(double js, const Calibration& cal);

}  // namespace membench::risk
