#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "membench/attacks.hpp"
#include "membench/error.hpp"
#include "membench/metrics.hpp"
#include "oracles.hpp"

using namespace membench;
using namespace membench::attacks;
using nn::Shape;
using nn::Tensor;

namespace {

// Softmax of a fixed linear map; a model-free stand-in for a trained target.
PosteriorOracle linear_oracle(std::size_t dim, std::size_t k, double gain) {
  return [=](const Tensor& x) {
    std::vector<double> logits(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < dim; ++j) logits[c] += gain * x[j] * (j % k == c ? 1.0 : -0.1);
    return nn::softmax(logits);
  };
}

std::vector<std::size_t> range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

}  // namespace

TEST(Features, SortedDescending) {
  EXPECT_EQ(extract_features(FeatureMode::sorted, {0.1, 0.7, 0.2}, 0).vector, (std::vector<double>{0.7, 0.2, 0.1}));
}

TEST(Features, NormalPlusLabelAppendsCorrectnessBit) {
  EXPECT_EQ(extract_features(FeatureMode::normal_plus_label, {0.7, 0.2, 0.1}, 0).vector,
            (std::vector<double>{0.7, 0.2, 0.1, 1.0}));
  EXPECT_EQ(extract_features(FeatureMode::normal_plus_label, {0.7, 0.2, 0.1}, 1).vector.back(), 0.0);
}

TEST(Features, TopThreePadsShortVectors) {
  EXPECT_EQ(extract_features(FeatureMode::top3, {0.6, 0.4}, 0).vector, (std::vector<double>{0.6, 0.4, 0.0}));
}

TEST(Features, ShapeInvariantsOnRandomPosteriors) {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 2 + t % 9;
    std::vector<double> logits(k);
    for (auto& v : logits) v = n(rng);
    const auto p = nn::softmax(logits);
    const int y = static_cast<int>(t % k);
    const auto top = extract_features(FeatureMode::top3, p, y).vector;
    const auto sorted = extract_features(FeatureMode::sorted, p, y).vector;
    const auto normal = extract_features(FeatureMode::normal, p, y).vector;
    const auto label = extract_features(FeatureMode::normal_plus_label, p, y).vector;
    ASSERT_EQ(top.size(), 3u);
    ASSERT_EQ(sorted.size(), k);
    ASSERT_EQ(normal.size(), k);
    ASSERT_EQ(label.size(), k + 1);
    EXPECT_TRUE(std::is_sorted(top.rbegin(), top.rend()));
    EXPECT_TRUE(std::is_sorted(sorted.rbegin(), sorted.rend()));
    EXPECT_NEAR(std::accumulate(normal.begin(), normal.end(), 0.0), 1.0, 1e-12);
    EXPECT_TRUE(label.back() == 0.0 || label.back() == 1.0);
  }
}

TEST(Features, AugmentedModeNeedsOracle) {
  EXPECT_THROW(extract_features(FeatureMode::augmented, {0.5, 0.5}, 0), InvalidInput);
}

TEST(MetricCorr, Examples) {
  EXPECT_EQ(metric_corr({0.7, 0.2, 0.1}, 0), 1);
  EXPECT_EQ(metric_corr({0.7, 0.2, 0.1}, 2), 0);
  EXPECT_EQ(metric_corr({0.4, 0.4, 0.2}, 0), 1);
  EXPECT_EQ(metric_corr({0.4, 0.4, 0.2}, 1), 0);
}

TEST(Entropy, Examples) {
  EXPECT_NEAR(entropy({0.0, 1.0, 0.0}), 0.0, 1e-12);
  EXPECT_NEAR(entropy(std::vector<double>(10, 0.1)), 2.302585092994046, 1e-9);
  EXPECT_NEAR(entropy({0.5, 0.5}), 0.6931471805599453, 1e-9);
}

TEST(Ment, Examples) {
  EXPECT_NEAR(ment({0.0, 1.0, 0.0}, 1), 0.0, 1e-9);
  EXPECT_NEAR(ment({0.5, 0.5}, 0), 0.6931471805599453, 1e-9);
  EXPECT_NEAR(ment(std::vector<double>(10, 0.1), 0), 4.144653167389282, 1e-9);
  EXPECT_NEAR(ment({0.7, 0.2, 0.1}, 1), 1.7674813000037974, 1e-9);
}

TEST(Ment, OriginalVariant) {
  EXPECT_NEAR(ment(std::vector<double>(10, 0.1), 0, MentVariant::original), 2.1671510477866827, 1e-9);
  EXPECT_NEAR(ment({0.0, 1.0, 0.0}, 1, MentVariant::original), 0.0, 1e-9);
  EXPECT_THROW(ment({0.5, 0.5}, 2), IndexError);
}

TEST(MetricConf, BoundaryIsInclusive) {
  ThresholdTable t{MetricTag::conf, {0.8, 0.8}, 0.3};
  EXPECT_EQ(metric_conf({0.9, 0.1}, 0, t), 1);
  EXPECT_EQ(metric_conf({0.8, 0.2}, 0, t), 1);
  EXPECT_EQ(metric_conf({0.5, 0.5}, 0, t), 0);
}

TEST(MetricConf, MissingClassFallsBackToGlobal) {
  ThresholdTable t{MetricTag::conf, {0.8}, 0.3};
  EXPECT_EQ(metric_conf({0.1, 0.1, 0.8}, 2, t), 1);
  EXPECT_DOUBLE_EQ(t.threshold_for(2), 0.3);
}

TEST(MetricEnt, OneHotIsMemberForPositiveThreshold) {
  ThresholdTable t{MetricTag::ent, {}, 1e-6};
  EXPECT_EQ(metric_ent({1.0, 0.0}, 0, t), 1);
  ThresholdTable m{MetricTag::ment, {}, 0.5};
  EXPECT_EQ(metric_ment({0.5, 0.5}, 0, m), 0);
  EXPECT_EQ(metric_ment({0.99, 0.01}, 0, m), 1);
}

TEST(Thresholds, SeparableConfidenceSets) {
  const std::vector<double> mv{0.9, 0.8}, nv{0.2, 0.1};
  const std::vector<int> ml{0, 0}, nl{0, 0};
  const auto t = select_thresholds(MetricTag::conf, mv, ml, nv, nl, 1);
  EXPECT_DOUBLE_EQ(t.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(t.global, 0.5);
  for (double v : mv) EXPECT_TRUE(t.is_member(v, 0));
  for (double v : nv) EXPECT_FALSE(t.is_member(v, 0));
}

TEST(Thresholds, EntropyDirectionIsReversed) {
  const std::vector<double> mv{0.1, 0.2}, nv{0.8, 0.9};
  const std::vector<int> labels{0, 0};
  const auto t = select_thresholds(MetricTag::ent, mv, labels, nv, labels, 1);
  EXPECT_DOUBLE_EQ(t.global, 0.5);
  EXPECT_TRUE(t.is_member(0.1, 0));
  EXPECT_FALSE(t.is_member(0.9, 0));
}

TEST(Thresholds, IdenticalDistributionsGiveChance) {
  const std::vector<double> v{0.3, 0.5, 0.7};
  const std::vector<int> l{0, 0, 0};
  const auto t = select_thresholds(MetricTag::conf, v, l, v, l, 1);
  int tp = 0, tn = 0;
  for (double x : v) tp += t.is_member(x, 0);
  for (double x : v) tn += !t.is_member(x, 0);
  EXPECT_DOUBLE_EQ((tp / 3.0 + tn / 3.0) / 2.0, 0.5);
  EXPECT_DOUBLE_EQ(t.global, 0.3 - 1.0);
}

TEST(Thresholds, AllValuesIdenticalUsesThatValue) {
  const std::vector<double> v{0.4, 0.4};
  const std::vector<int> l{0, 1};
  const auto t = select_thresholds(MetricTag::ment, v, l, v, l, 2);
  EXPECT_DOUBLE_EQ(t.global, 0.4);
  EXPECT_DOUBLE_EQ(t.per_class[1], 0.4);
  EXPECT_TRUE(t.is_member(0.4, 1));
}

TEST(Thresholds, ClassMissingOnOneSideUsesGlobal) {
  const std::vector<double> mv{0.9, 0.7}, nv{0.1, 0.2};
  const std::vector<int> ml{0, 1}, nl{0, 0};
  const auto t = select_thresholds(MetricTag::conf, mv, ml, nv, nl, 3);
  EXPECT_DOUBLE_EQ(t.per_class[1], t.global);
  EXPECT_DOUBLE_EQ(t.per_class[2], t.global);
}

TEST(Thresholds, MatchesBruteForceOnRandomSets) {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> grid(0, 6);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + t % 3;
    const auto tag = static_cast<MetricTag>(t % 4);
    const bool coarse = t % 2 == 0;  // coarse values force ties
    std::vector<double> mv, nv;
    std::vector<int> ml, nl;
    const std::size_t nm = 1 + rng() % 40, nn_ = 1 + rng() % 40;
    for (std::size_t i = 0; i < nm; ++i) {
      mv.push_back(coarse ? grid(rng) / 6.0 : u(rng));
      ml.push_back(static_cast<int>(rng() % k));
    }
    for (std::size_t i = 0; i < nn_; ++i) {
      nv.push_back(coarse ? grid(rng) / 6.0 : u(rng));
      nl.push_back(static_cast<int>(rng() % k));
    }
    const bool greater = tag == MetricTag::conf || tag == MetricTag::distance;
    const auto table = select_thresholds(tag, mv, ml, nv, nl, k);
    const double global = testkit::brute_threshold(greater, mv, nv);
    ASSERT_EQ(table.global, global) << "case " << t;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < nm; ++i)
        if (ml[i] == static_cast<int>(c)) a.push_back(mv[i]);
      for (std::size_t i = 0; i < nn_; ++i)
        if (nl[i] == static_cast<int>(c)) b.push_back(nv[i]);
      const double expect = a.empty() || b.empty() ? global : testkit::brute_threshold(greater, a, b);
      ASSERT_EQ(table.per_class[c], expect) << "case " << t << " class " << c;
    }
  }
}

TEST(Thresholds, MismatchedLengthsThrow) {
  const std::vector<double> v{0.1};
  const std::vector<int> l{0, 1};
  EXPECT_THROW(select_thresholds(MetricTag::conf, v, l, v, l, 2), InvalidInput);
  EXPECT_THROW(select_thresholds(MetricTag::conf, {}, {}, v, std::vector<int>{0}, 2), InvalidInput);
}

namespace {

// Halfplane classifier through the origin with unit normal (0.6, 0.8).
LabelOracle halfplane() {
  return [](const Tensor& x) { return 0.6 * x[0] + 0.8 * x[1] > 0.0 ? 1 : 0; };
}

}  // namespace

TEST(LabelOnly, LinearBoundaryDistanceWithinTenPercent) {
  for (double d : {0.3, 1.0, 2.5}) {
    for (std::size_t budget : {500u, 600u, 1000u}) {
      Rng rng(5);
      const Tensor x = Tensor::from_vector({0.6 * d, 0.8 * d});
      const auto r = label_only_distance(halfplane(), x, 1, budget, rng);
      EXPECT_FALSE(r.flagged);
      EXPECT_LE(r.queries, budget);
      EXPECT_NEAR(r.distance, d, 0.1 * d) << "d=" << d << " budget=" << budget;
      EXPECT_GE(r.distance, d * (1 - 1e-9));
    }
  }
}

TEST(LabelOnly, MisclassifiedSampleHasZeroDistance) {
  Rng rng(6);
  const auto r = label_only_distance(halfplane(), Tensor::from_vector({1.0, 1.0}), 0, 100, rng);
  EXPECT_EQ(r.distance, 0.0);
  EXPECT_EQ(r.queries, 1u);
  ThresholdTable t{MetricTag::distance, {}, 1e-3};
  EXPECT_FALSE(t.is_member(r.distance, 0));
}

TEST(LabelOnly, ConstantOracleIsFlaggedAtMaxRadius) {
  Rng rng(7);
  const LabelOracle constant = [](const Tensor&) { return 0; };
  const auto r = label_only_distance(constant, Tensor::from_vector({0.0, 0.0, 0.0}), 0, 2000, rng);
  EXPECT_TRUE(r.flagged);
  EXPECT_EQ(r.distance, LabelOnlyOptions{}.max_radius);
}

TEST(LabelOnly, EstimateIsMonotoneInBudget) {
  const Tensor x = Tensor::from_vector({0.2, 0.9, -0.4, 0.3});
  const LabelOracle oracle = [](const Tensor& v) { return v[0] + 0.5 * v[1] - 0.3 * v[2] * v[2] > 0.1 ? 1 : 0; };
  double previous = INFINITY;
  for (std::size_t budget = 10; budget <= 1200; budget += 37) {
    Rng rng(8);
    const double d = label_only_distance(oracle, x, 1, budget, rng).distance;
    EXPECT_LE(d, previous) << "budget " << budget;
    previous = d;
  }
}

TEST(LabelOnly, TinyBudgetThrows) {
  Rng rng(9);
  EXPECT_THROW(label_only_distance(halfplane(), Tensor::from_vector({1.0, 1.0}), 1, 9, rng), InvalidInput);
}

TEST(Augmented, SingleViewEqualsTopThreeOfOneView) {
  const auto oracle = linear_oracle(4, 5, 1.3);
  const Tensor x = Tensor::from_vector({0.3, -0.2, 1.1, 0.4});
  Rng a(10);
  Rng b = a;
  const auto f = augmented_features(oracle, x, 1, a);
  const auto expect = extract_features(FeatureMode::top3, oracle(data::simple_augment(x, b)), 0).vector;
  EXPECT_EQ(f.vector, expect);
  EXPECT_EQ(f.mode, FeatureMode::augmented);
}

TEST(Augmented, TenViewsGiveThirtyValuesOrderedByConfidence) {
  const auto oracle = linear_oracle(4, 5, 2.0);
  Rng rng(11);
  const auto f = augmented_features(oracle, Tensor::from_vector({0.3, -0.2, 1.1, 0.4}), 10, rng);
  ASSERT_EQ(f.vector.size(), 30u);
  for (std::size_t v = 1; v < 10; ++v) EXPECT_GE(f.vector[3 * (v - 1)], f.vector[3 * v]);
}

TEST(Augmented, MoreConfidentViewComesFirst) {
  int calls = 0;
  const PosteriorOracle oracle = [&](const Tensor&) {
    return ++calls == 1 ? Posteriors{0.6, 0.3, 0.1} : Posteriors{0.05, 0.9, 0.05};
  };
  Rng rng(12);
  const auto f = augmented_features(oracle, Tensor::from_vector({1.0, 2.0}), 2, rng);
  EXPECT_EQ(f.vector, (std::vector<double>{0.9, 0.05, 0.05, 0.6, 0.3, 0.1}));
}

TEST(Augmented, ZeroViewsThrows) {
  Rng rng(13);
  EXPECT_THROW(augmented_features(linear_oracle(2, 2, 1.0), Tensor::from_vector({1.0, 2.0}), 0, rng), InvalidInput);
}

TEST(AttackNames, RoundTrip) {
  for (auto k : standard_attacks()) EXPECT_EQ(parse_attack(attack_name(k)), k);
  EXPECT_EQ(parse_attack("augmented"), AttackKind::augmented);
  EXPECT_EQ(standard_attacks().size(), 9u);
  EXPECT_THROW(parse_attack("nn_magic"), ConfigError);
}

class RunAttack : public ::testing::Test {
 protected:
  data::Dataset ds = data::synth_gaussian(3, 6, 40, 2.0, 21);
  std::vector<std::size_t> members = range(0, 60);
  std::vector<std::size_t> nonmembers = range(60, 120);
  PosteriorOracle oracle = linear_oracle(6, 3, 1.5);
  AttackOptions options;

  void SetUp() override {
    options.attack_epochs = 20;
    options.attack_batch_size = 16;
    options.seed = 4;
  }
};

TEST_F(RunAttack, SelfConsistencyOnCalibrationSet) {
  for (auto kind : {AttackKind::nn_sorted, AttackKind::nn_normal_label}) {
    const auto prepared = prepare_attack(kind, oracle, {ds, members}, {ds, nonmembers}, 3, options);
    const auto verdicts = run_attack(prepared, oracle, {ds, members}, {ds, nonmembers}, options);
    EXPECT_DOUBLE_EQ(metrics::accuracy(verdicts), prepared.training_accuracy) << attack_name(kind);
  }
}

TEST_F(RunAttack, MembershipIndependentOracleIsNearChance) {
  ds = data::synth_gaussian(3, 6, 200, 2.0, 22);
  members = range(0, 300);
  nonmembers = range(300, 600);
  std::shuffle(members.begin(), members.end(), Rng(1));
  for (auto kind : {AttackKind::metric_conf, AttackKind::metric_ent, AttackKind::metric_corr}) {
    std::vector<std::size_t> cal_m(members.begin(), members.begin() + 150), cal_n(nonmembers.begin(), nonmembers.begin() + 150);
    std::vector<std::size_t> ev_m(members.begin() + 150, members.end()), ev_n(nonmembers.begin() + 150, nonmembers.end());
    const auto prepared = prepare_attack(kind, oracle, {ds, cal_m}, {ds, cal_n}, 3, options);
    const auto verdicts = run_attack(prepared, oracle, {ds, ev_m}, {ds, ev_n}, options);
    EXPECT_NEAR(metrics::accuracy(verdicts), 0.5, 0.1) << attack_name(kind);
  }
}

TEST_F(RunAttack, VerdictsAreMembersFirstWithTruth) {
  const auto prepared = prepare_attack(AttackKind::metric_conf, oracle, {ds, members}, {ds, nonmembers}, 3, options);
  const auto v = run_attack(prepared, oracle, {ds, members}, {ds, nonmembers}, options);
  ASSERT_EQ(v.size(), 120u);
  for (std::size_t i = 0; i < 60; ++i) {
    EXPECT_EQ(v[i].sample_id, members[i]);
    EXPECT_EQ(v[i].truth, true);
    EXPECT_EQ(v[60 + i].truth, false);
    EXPECT_TRUE(v[i].score.has_value());
  }
}

TEST_F(RunAttack, LabelOnlyIsIndependentOfEvaluationOrder) {
  options.label_only_budget = 100;
  const ThresholdTable table{MetricTag::distance, {}, 0.5};
  PreparedAttack prepared{AttackKind::label_only, std::nullopt, table, -1.0};
  const std::vector<std::size_t> m = range(0, 20), n = range(60, 80);
  auto rm = m, rn = n;
  std::reverse(rm.begin(), rm.end());
  std::reverse(rn.begin(), rn.end());
  const auto a = run_attack(prepared, oracle, {ds, m}, {ds, n}, options);
  const auto b = run_attack(prepared, oracle, {ds, rm}, {ds, rn}, options);
  auto by_id = [](std::vector<MembershipVerdict> v) {
    std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.sample_id < y.sample_id; });
    return v;
  };
  const auto sa = by_id(a), sb = by_id(b);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(sa[i].sample_id, sb[i].sample_id);
    EXPECT_EQ(sa[i].member, sb[i].member);
    EXPECT_EQ(sa[i].score, sb[i].score);
  }
}

TEST_F(RunAttack, ErrorsForUnbalancedOrUnpreparedAttacks) {
  const std::vector<std::size_t> fewer = range(60, 70);
  PreparedAttack corr{AttackKind::metric_corr, std::nullopt, std::nullopt, -1.0};
  EXPECT_THROW(run_attack(corr, oracle, {ds, members}, {ds, fewer}, options), InvalidInput);
  PreparedAttack nn{AttackKind::nn_top3, std::nullopt, std::nullopt, -1.0};
  EXPECT_THROW(run_attack(nn, oracle, {ds, members}, {ds, nonmembers}, options), ConfigError);
  PreparedAttack conf{AttackKind::metric_conf, std::nullopt, std::nullopt, -1.0};
  EXPECT_THROW(run_attack(conf, oracle, {ds, members}, {ds, nonmembers}, options), ConfigError);
  EXPECT_THROW(prepare_attack(AttackKind::metric_conf, oracle, {ds, {}}, {ds, nonmembers}, 3, options), InvalidInput);
}

TEST(VerdictCsv, HeaderAndRows) {
  std::vector<MembershipVerdict> v(2);
  v[0] = {7, true, 0.75, true, false};
  v[1] = {9, false, std::nullopt, false, false};
  std::ostringstream out;
  write_verdicts_csv(out, v);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "sample_id,decision,score,truth");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("7,member,0.75", 0), 0u) << line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("9,non-member,", 0), 0u) << line;
}
