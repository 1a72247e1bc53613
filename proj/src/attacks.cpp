#include "membench/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "membench/augment.hpp"
#include "membench/error.hpp"

namespace membench::attacks {

using nn::Tensor;

namespace {

void require_posteriors(const Posteriors& p) {
  if (p.empty()) throw InvalidInput("empty posterior vector");
}

std::vector<double> sorted_desc(const Posteriors& p) {
  std::vector<double> s(p.begin(), p.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

std::vector<double> top3(const Posteriors& p) {
  auto s = sorted_desc(p);
  s.resize(3, 0.0);
  return s;
}

}  // namespace

AttackFeature extract_features(FeatureMode mode, const Posteriors& p, int y) {
  require_posteriors(p);
  switch (mode) {
    case FeatureMode::top3: return {mode, top3(p)};
    case FeatureMode::sorted: return {mode, sorted_desc(p)};
    case FeatureMode::normal: return {mode, p};
    case FeatureMode::normal_plus_label: {
      std::vector<double> v = p;
      v.push_back(metric_corr(p, y) ? 1.0 : 0.0);
      return {mode, std::move(v)};
    }
    case FeatureMode::augmented: break;
  }
  throw InvalidInput("augmented features need an oracle; use augmented_features()");
}

int metric_corr(const Posteriors& p, int y) {
  require_posteriors(p);
  return nn::argmax(p) == y ? 1 : 0;
}

double entropy(const Posteriors& p) {
  require_posteriors(p);
  double h = 0.0;
  for (double v : p) h -= v * std::log(std::max(v, nn::kProbFloor));
  return std::max(h, 0.0);
}

double ment(const Posteriors& p, int y, MentVariant variant) {
  require_posteriors(p);
  if (y < 0 || static_cast<std::size_t>(y) >= p.size()) throw IndexError("ment: label out of range");
  const auto yi = static_cast<std::size_t>(y);
  double value = -(1.0 - p[yi]) * std::log(std::max(p[yi], nn::kProbFloor));
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i == yi) continue;
    const double arg = variant == MentVariant::as_printed ? p[i] : 1.0 - p[i];
    value -= p[i] * std::log(std::max(arg, nn::kProbFloor));
  }
  return value;
}

const char* metric_tag_name(MetricTag tag) {
  switch (tag) {
    case MetricTag::conf: return "conf";
    case MetricTag::ent: return "ent";
    case MetricTag::ment: return "ment";
    case MetricTag::distance: return "distance";
  }
  return "?";
}

double ThresholdTable::threshold_for(int y) const {
  if (y >= 0 && static_cast<std::size_t>(y) < per_class.size()) return per_class[static_cast<std::size_t>(y)];
  return global;
}

bool ThresholdTable::is_member(double value, int y) const {
  const double tau = threshold_for(y);
  return metric == MetricTag::conf || metric == MetricTag::distance ? value >= tau : value <= tau;
}

int metric_conf(const Posteriors& p, int y, const ThresholdTable& table) {
  require_posteriors(p);
  if (y < 0 || static_cast<std::size_t>(y) >= p.size()) throw IndexError("metric_conf: label out of range");
  return table.is_member(p[static_cast<std::size_t>(y)], y) ? 1 : 0;
}

int metric_ent(const Posteriors& p, int y, const ThresholdTable& table) {
  return table.is_member(entropy(p), y) ? 1 : 0;
}

int metric_ment(const Posteriors& p, int y, const ThresholdTable& table, MentVariant variant) {
  return table.is_member(ment(p, y, variant), y) ? 1 : 0;
}

namespace {

// Threshold maximizing balanced accuracy via one sorted sweep. Balanced
// accuracy is compared through the exact integer tp * N + tn * M.
double best_threshold(bool member_if_greater, std::vector<double> members, std::vector<double> nonmembers) {
  struct Item {
    double value;
    bool member;
  };
  std::vector<Item> items;
  items.reserve(members.size() + nonmembers.size());
  for (double v : members) items.push_back({v, true});
  for (double v : nonmembers) items.push_back({v, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.value < b.value; });

  const double lo = items.front().value;
  const double hi = items.back().value;
  if (lo == hi) return lo;

  const auto m_total = static_cast<long long>(members.size());
  const auto n_total = static_cast<long long>(nonmembers.size());
  // Counts of members / non-members with value <= the current cut.
  long long m_below = 0;
  long long n_below = 0;
  auto score = [&](long long mb, long long nb) {
    const long long tp = member_if_greater ? m_total - mb : mb;
    const long long tn = member_if_greater ? nb : n_total - nb;
    return tp * n_total + tn * m_total;
  };

  double best_tau = lo - 1.0;
  long long best = score(0, 0);
  for (std::size_t i = 0; i < items.size();) {
    const double v = items[i].value;
    while (i < items.size() && items[i].value == v) {
      (items[i].member ? m_below : n_below)++;
      ++i;
    }
    const double tau = i < items.size() ? (v + items[i].value) / 2.0 : hi + 1.0;
    const long long s = score(m_below, n_below);
    if (s > best) {
      best = s;
      best_tau = tau;
    }
  }
  return best_tau;
}

}  // namespace

ThresholdTable select_thresholds(MetricTag metric, std::span<const double> member_values,
                                 std::span<const int> member_labels, std::span<const double> nonmember_values,
                                 std::span<const int> nonmember_labels, std::size_t num_classes) {
  if (member_values.size() != member_labels.size() || nonmember_values.size() != nonmember_labels.size()) {
    throw InvalidInput("select_thresholds: values and labels differ in length");
  }
  if (member_values.empty() || nonmember_values.empty()) {
    throw InvalidInput("select_thresholds: need both member and non-member values");
  }
  const bool greater = metric == MetricTag::conf || metric == MetricTag::distance;
  ThresholdTable table;
  table.metric = metric;
  table.global = best_threshold(greater, {member_values.begin(), member_values.end()},
                                {nonmember_values.begin(), nonmember_values.end()});
  table.per_class.assign(num_classes, table.global);
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<double> m, n;
    for (std::size_t i = 0; i < member_values.size(); ++i)
      if (member_labels[i] == static_cast<int>(c)) m.push_back(member_values[i]);
    for (std::size_t i = 0; i < nonmember_values.size(); ++i)
      if (nonmember_labels[i] == static_cast<int>(c)) n.push_back(nonmember_values[i]);
    if (!m.empty() && !n.empty()) table.per_class[c] = best_threshold(greater, std::move(m), std::move(n));
  }
  return table;
}

LabelOracle label_oracle(PosteriorOracle oracle) {
  return [oracle = std::move(oracle)](const Tensor& x) { return nn::argmax(oracle(x)); };
}

LabelOnlyResult label_only_distance(const LabelOracle& oracle, const Tensor& x, int y, std::size_t budget, Rng& rng,
                                    const LabelOnlyOptions& options) {
  if (budget < 10) throw InvalidInput("label-only budget must be >= 10");
  if (options.directions < 1 || !(options.initial_radius > 0.0) || !(options.max_radius >= options.initial_radius)) {
    throw InvalidInput("label-only options out of range");
  }
  LabelOnlyResult result;
  auto probe = [&](const Tensor& point) {
    ++result.queries;
    return oracle(point) != y;
  };
  if (probe(x)) return result;

  enum class Phase { expand, bisect, done };
  struct Direction {
    Tensor unit;
    Phase phase = Phase::expand;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double radius = 0.0;
  };
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Direction> dirs(options.directions);
  for (auto& d : dirs) {
    d.unit = Tensor(x.shape());
    double norm = 0.0;
    for (auto& v : d.unit.data()) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : d.unit.data()) v /= norm;
    d.radius = options.initial_radius;
  }

  auto point_at = [&](const Direction& d, double r) {
    Tensor p = x;
    for (std::size_t i = 0; i < p.numel(); ++i) p[i] += r * d.unit[i];
    return p;
  };

  bool active = true;
  while (active && result.queries < budget) {
    active = false;
    for (auto& d : dirs) {
      if (d.phase == Phase::done) continue;
      if (result.queries >= budget) break;
      active = true;
      if (d.phase == Phase::expand) {
        if (probe(point_at(d, d.radius))) {
          d.hi = d.radius;
          d.phase = Phase::bisect;
        } else if (d.radius >= options.max_radius) {
          d.phase = Phase::done;
        } else {
          d.lo = d.radius;
          d.radius = std::min(2.0 * d.radius, options.max_radius);
        }
      } else {
        const double mid = 0.5 * (d.lo + d.hi);
        if (probe(point_at(d, mid))) {
          d.hi = mid;
        } else {
          d.lo = mid;
        }
      }
      if (d.phase == Phase::bisect && d.hi - d.lo <= options.relative_tolerance * d.hi) d.phase = Phase::done;
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : dirs) best = std::min(best, d.hi);
  if (std::isinf(best)) {
    result.distance = options.max_radius;
    result.flagged = true;
  } else {
    result.distance = best;
  }
  return result;
}

AttackFeature augmented_features(const PosteriorOracle& oracle, const Tensor& x, std::size_t views, Rng& rng,
                                 std::span<const double> feature_std) {
  if (views < 1) throw InvalidInput("augmented attack needs K >= 1 views");
  std::vector<Posteriors> posts;
  posts.reserve(views);
  for (std::size_t v = 0; v < views; ++v) posts.push_back(oracle(data::simple_augment(x, rng, feature_std)));
  std::stable_sort(posts.begin(), posts.end(), [](const Posteriors& a, const Posteriors& b) {
    return *std::max_element(a.begin(), a.end()) > *std::max_element(b.begin(), b.end());
  });
  AttackFeature out{FeatureMode::augmented, {}};
  out.vector.reserve(3 * views);
  for (const auto& p : posts) {
    const auto t = top3(p);
    out.vector.insert(out.vector.end(), t.begin(), t.end());
  }
  return out;
}

namespace {

struct KindInfo {
  AttackKind kind;
  const char* name;
};

constexpr KindInfo kKinds[] = {
    {AttackKind::nn_top3, "nn_top3"},         {AttackKind::nn_sorted, "nn_sorted"},
    {AttackKind::nn_normal, "nn_normal"},     {AttackKind::nn_normal_label, "nn_normal_label"},
    {AttackKind::metric_corr, "metric_corr"}, {AttackKind::metric_conf, "metric_conf"},
    {AttackKind::metric_ent, "metric_ent"},   {AttackKind::metric_ment, "metric_ment"},
    {AttackKind::label_only, "label_only"},   {AttackKind::augmented, "augmented"},
};

bool is_nn(AttackKind kind) {
  return kind == AttackKind::nn_top3 || kind == AttackKind::nn_sorted || kind == AttackKind::nn_normal ||
         kind == AttackKind::nn_normal_label || kind == AttackKind::augmented;
}

FeatureMode feature_mode(AttackKind kind) {
  switch (kind) {
    case AttackKind::nn_top3: return FeatureMode::top3;
    case AttackKind::nn_sorted: return FeatureMode::sorted;
    case AttackKind::nn_normal: return FeatureMode::normal;
    case AttackKind::nn_normal_label: return FeatureMode::normal_plus_label;
    default: return FeatureMode::augmented;
  }
}

MetricTag metric_of(AttackKind kind) {
  switch (kind) {
    case AttackKind::metric_conf: return MetricTag::conf;
    case AttackKind::metric_ent: return MetricTag::ent;
    case AttackKind::metric_ment: return MetricTag::ment;
    default: return MetricTag::distance;
  }
}

std::uint64_t attack_seed(const AttackOptions& options, AttackKind kind) {
  return mix_seed(options.seed, static_cast<std::uint64_t>(kind) + 101);
}

// Attack-model input for one sample.
std::vector<double> nn_features(AttackKind kind, const PosteriorOracle& oracle, const Tensor& x, int y,
                                const AttackOptions& options) {
  if (kind == AttackKind::augmented) {
    Rng rng(content_seed(attack_seed(options, kind), x.data()));
    return augmented_features(oracle, x, options.augment_views, rng, options.feature_std).vector;
  }
  return extract_features(feature_mode(kind), oracle(x), y).vector;
}

// Raw metric value for one sample (label-only: boundary distance).
struct MetricValue {
  double value;
  bool flagged;
};

MetricValue metric_value(AttackKind kind, const PosteriorOracle& oracle, const Tensor& x, int y,
                         const AttackOptions& options) {
  if (kind == AttackKind::label_only) {
    Rng rng(content_seed(attack_seed(options, kind), x.data()));
    const auto r = label_only_distance(label_oracle(oracle), x, y, options.label_only_budget, rng, options.label_only);
    return {r.distance, r.flagged};
  }
  const Posteriors p = oracle(x);
  if (y < 0 || static_cast<std::size_t>(y) >= p.size()) throw IndexError("label outside the oracle's class range");
  switch (kind) {
    case AttackKind::metric_conf: return {p[static_cast<std::size_t>(y)], false};
    case AttackKind::metric_ent: return {entropy(p), false};
    case AttackKind::metric_ment: return {ment(p, y, options.ment_variant), false};
    default: throw InvalidInput("not a thresholded attack");
  }
}

}  // namespace

const char* attack_name(AttackKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "?";
}

AttackKind parse_attack(const std::string& name) {
  for (const auto& k : kKinds)
    if (name == k.name) return k.kind;
  throw ConfigError("unknown attack '" + name + "'");
}

const std::vector<AttackKind>& standard_attacks() {
  static const std::vector<AttackKind> all = {
      AttackKind::nn_top3,     AttackKind::nn_sorted,   AttackKind::nn_normal,
      AttackKind::nn_normal_label, AttackKind::metric_corr, AttackKind::metric_conf,
      AttackKind::metric_ent,  AttackKind::metric_ment, AttackKind::label_only,
  };
  return all;
}

PreparedAttack prepare_attack(AttackKind kind, const PosteriorOracle& shadow, const SampleSet& members,
                              const SampleSet& nonmembers, std::size_t num_classes, const AttackOptions& options) {
  if (members.indices.empty() || nonmembers.indices.empty()) {
    throw InvalidInput("attack calibration needs shadow members and non-members");
  }
  PreparedAttack prepared;
  prepared.kind = kind;
  if (kind == AttackKind::metric_corr) return prepared;

  if (is_nn(kind)) {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    for (const auto* set : {&members, &nonmembers}) {
      const int label = set == &members ? 1 : 0;
      for (auto i : set->indices) {
        features.push_back(nn_features(kind, shadow, set->dataset.samples[i], set->dataset.labels[i], options));
        labels.push_back(label);
      }
    }
    zoo::AttackModelSpec spec;
    spec.epochs = options.attack_epochs;
    spec.batch_size = options.attack_batch_size;
    spec.seed = attack_seed(options, kind);
    prepared.model = zoo::train_attack_model(features, labels, spec);
    prepared.training_accuracy =
        prepared.model->history.empty() ? -1.0 : prepared.model->history.back().train_accuracy;
    return prepared;
  }

  std::vector<double> mv, nv;
  std::vector<int> ml, nl;
  for (auto i : members.indices) {
    mv.push_back(metric_value(kind, shadow, members.dataset.samples[i], members.dataset.labels[i], options).value);
    ml.push_back(members.dataset.labels[i]);
  }
  for (auto i : nonmembers.indices) {
    nv.push_back(
        metric_value(kind, shadow, nonmembers.dataset.samples[i], nonmembers.dataset.labels[i], options).value);
    nl.push_back(nonmembers.dataset.labels[i]);
  }
  prepared.table = select_thresholds(metric_of(kind), mv, ml, nv, nl, num_classes);
  return prepared;
}

std::vector<MembershipVerdict> run_attack(const PreparedAttack& attack, const PosteriorOracle& target,
                                          const SampleSet& members, const SampleSet& nonmembers,
                                          const AttackOptions& options) {
  if (members.indices.size() != nonmembers.indices.size()) {
    throw InvalidInput("evaluation set is not balanced: " + std::to_string(members.indices.size()) + " members vs " +
                       std::to_string(nonmembers.indices.size()) + " non-members");
  }
  if (is_nn(attack.kind) && !attack.model) throw ConfigError(std::string(attack_name(attack.kind)) + ": no attack model");
  if (attack.kind != AttackKind::metric_corr && !is_nn(attack.kind) && !attack.table) {
    throw ConfigError(std::string(attack_name(attack.kind)) + ": no threshold table");
  }

  std::vector<MembershipVerdict> out;
  out.reserve(members.indices.size() * 2);
  for (const auto* set : {&members, &nonmembers}) {
    const bool truth = set == &members;
    for (auto i : set->indices) {
      const Tensor& x = set->dataset.samples[i];
      const int y = set->dataset.labels[i];
      MembershipVerdict v;
      v.sample_id = i;
      v.truth = truth;
      if (is_nn(attack.kind)) {
        const auto f = nn_features(attack.kind, target, x, y, options);
        const auto post = zoo::query(*attack.model, Tensor::from_vector(f));
        v.member = nn::argmax(post) == 1;
        v.score = post[1];
      } else if (attack.kind == AttackKind::metric_corr) {
        v.member = metric_corr(target(x), y) == 1;
        v.score = v.member ? 1.0 : 0.0;
      } else {
        const auto mv = metric_value(attack.kind, target, x, y, options);
        v.member = attack.table->is_member(mv.value, y);
        v.flagged = mv.flagged;
        const bool greater = attack.table->metric == MetricTag::conf || attack.table->metric == MetricTag::distance;
        v.score = greater ? mv.value : -mv.value;
      }
      out.push_back(v);
    }
  }
  return out;
}

void write_verdicts_csv(std::ostream& out, std::span<const MembershipVerdict> verdicts) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "sample_id,decision,score,truth\n";
  for (const auto& v : verdicts) {
    buf << v.sample_id << ',' << (v.member ? "member" : "non-member") << ',';
    if (v.score) buf << *v.score;
    buf << ',';
    if (v.truth) buf << (*v.truth ? "member" : "non-member");
    buf << '\n';
  }
  out << buf.str();
}

}  // namespace membench::attacks
