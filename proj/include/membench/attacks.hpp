#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "membench/data.hpp"
#include "membench/modelzoo.hpp"
#include "membench/nn.hpp"
#include "membench/rng.hpp"

namespace membench::attacks {

using nn::Posteriors;

enum class FeatureMode { top3, sorted, normal, normal_plus_label, augmented };

struct AttackFeature {
  FeatureMode mode = FeatureMode::normal;
  std::vector<double> vector;
};

// top3: three largest, descending, zero-padded when k < 3.
// sorted: all, descending. normal: as given.
// normal_plus_label: posteriors followed by 1 if argmax(p) == y else 0.
AttackFeature extract_features(FeatureMode mode, const Posteriors& p, int y);

// 1 iff argmax(p) == y (lowest index wins ties).
int metric_corr(const Posteriors& p, int y);

// -sum p_i ln p_i with floored logs.
double entropy(const Posteriors& p);

enum class MentVariant {
  as_printed,  // -(1 - p_y) ln p_y - sum_{i != y} p_i ln p_i
  original,    // -(1 - p_y) ln p_y - sum_{i != y} p_i ln(1 - p_i)
};

double ment(const Posteriors& p, int y, MentVariant variant = MentVariant::as_printed);

// conf and distance decide "member" when value >= tau; ent and ment when value <= tau.
enum class MetricTag { conf, ent, ment, distance };

const char* metric_tag_name(MetricTag tag);

struct ThresholdTable {
  MetricTag metric = MetricTag::conf;
  std::vector<double> per_class;
  double global = 0.0;

  double threshold_for(int y) const;
  bool is_member(double value, int y) const;
};

int metric_conf(const Posteriors& p, int y, const ThresholdTable& table);
int metric_ent(const Posteriors& p, int y, const ThresholdTable& table);
int metric_ment(const Posteriors& p, int y, const ThresholdTable& table,
                MentVariant variant = MentVariant::as_printed);

// Per class, picks the threshold maximizing balanced accuracy among the
// midpoints of adjacent distinct values plus a sentinel one unit outside
// each end; ties go to the smaller threshold. A class missing either side
// uses the pooled (global) threshold. When all values are identical the
// threshold is that value.
ThresholdTable select_thresholds(MetricTag metric, std::span<const double> member_values,
                                 std::span<const int> member_labels, std::span<const double> nonmember_values,
                                 std::span<const int> nonmember_labels, std::size_t num_classes);

using PosteriorOracle = std::function<Posteriors(const nn::Tensor&)>;
using LabelOracle = std::function<int(const nn::Tensor&)>;

LabelOracle label_oracle(PosteriorOracle oracle);

struct LabelOnlyOptions {
  std::size_t directions = 32;
  double initial_radius = 0.01;
  double max_radius = 16.0;
  double relative_tolerance = 1e-3;
};

struct LabelOnlyResult {
  double distance = 0.0;
  bool flagged = false;  // no label flip found; distance is max_radius
  std::size_t queries = 0;
};

// Estimates the L2 distance from x to the decision boundary. Random unit
// directions are searched round-robin, one query at a time: radii double from
// initial_radius until the label flips, then bisection narrows the bracket.
// Query order does not depend on the budget, so a larger budget only extends
// the schedule and never increases the estimate. Misclassified x returns 0.
LabelOnlyResult label_only_distance(const LabelOracle& oracle, const nn::Tensor& x, int y, std::size_t budget,
                                    Rng& rng, const LabelOnlyOptions& options = {});

// K simple-augmentation views of x, sorted by max confidence (descending),
// top-3 of each concatenated into a 3K vector.
AttackFeature augmented_features(const PosteriorOracle& oracle, const nn::Tensor& x, std::size_t views, Rng& rng,
                                 std::span<const double> feature_std = {});

enum class AttackKind {
  nn_top3,
  nn_sorted,
  nn_normal,
  nn_normal_label,
  metric_corr,
  metric_conf,
  metric_ent,
  metric_ment,
  label_only,
  augmented,
};

const char* attack_name(AttackKind kind);
AttackKind parse_attack(const std::string& name);
// The nine posterior/label attacks (excludes the augmented attack).
const std::vector<AttackKind>& standard_attacks();

struct MembershipVerdict {
  std::size_t sample_id = 0;
  bool member = false;
  std::optional<double> score;  // larger means "more likely member"
  std::optional<bool> truth;
  bool flagged = false;
};

// Samples of one dataset selected by index; ids in verdicts are these indices.
struct SampleSet {
  const data::Dataset& dataset;
  std::span<const std::size_t> indices;
};

struct AttackOptions {
  std::size_t attack_epochs = 100;
  std::size_t attack_batch_size = 128;
  std::size_t label_only_budget = 600;
  LabelOnlyOptions label_only;
  std::size_t augment_views = 10;
  MentVariant ment_variant = MentVariant::as_printed;
  std::uint64_t seed = 0;
  std::vector<double> feature_std;  // jitter scale for non-raster augmented views
};

/// Calibrated attack: a trained attack MLP or a threshold table.
struct PreparedAttack {
  AttackKind kind = AttackKind::metric_corr;
  std::optional<zoo::TrainedModel> model;
  std::optional<ThresholdTable> table;
  double training_accuracy = -1.0;  // attack model accuracy on its own training set
};

// Calibrates on the shadow oracle with shadow members / non-members.
PreparedAttack prepare_attack(AttackKind kind, const PosteriorOracle& shadow, const SampleSet& members,
                              const SampleSet& nonmembers, std::size_t num_classes, const AttackOptions& options);

// One verdict per sample (members first) with truth attached. Requires equal
// member and non-member counts.
std::vector<MembershipVerdict> run_attack(const PreparedAttack& attack, const PosteriorOracle& target,
                                          const SampleSet& members, const SampleSet& nonmembers,
                                          const AttackOptions& options);

void write_verdicts_csv(std::ostream& out, std::span<const MembershipVerdict> verdicts);

}  // namespace membench::attacks
