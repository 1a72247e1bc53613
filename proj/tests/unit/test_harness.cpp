#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "membench/error.hpp"
#include "membench/metrics.hpp"
#include "membench/scenario.hpp"
#include "oracles.hpp"

using namespace membench;
using namespace membench::harness;
using attacks::MembershipVerdict;

namespace {

// Small enough to run in a second or two. `data` comes last so callers can
// append an indented shadow source.
const char* const kTinyScenario = R"(
name: tiny
seed: 5
target:
  model: {kind: mlp, widths: [16]}
  recipe: {epochs: 8, batch_size: 16, lr0: 0.05}
attacks: [nn_top3, metric_corr, metric_conf, metric_ent]
attack: {epochs: 10}
risk: {bins: 10}
data:
  target: {kind: gaussian, classes: 3, dim: 4, per_class: 40, separation: 2.0}
)";

Scenario tiny(const std::string& extra = "") { return parse_scenario(std::string(kTinyScenario) + extra); }

std::string json_lines(const std::vector<ExperimentReport>& reports, EmitOptions options = {}) {
  std::ostringstream out;
  write_json_lines(out, reports, options);
  return out.str();
}

MembershipVerdict verdict(bool member, double score, bool truth) { return {0, member, score, truth, false}; }

}  // namespace

TEST(Metrics, AllCorrect) {
  const std::vector<MembershipVerdict> v{verdict(true, 0.9, true), verdict(true, 0.8, true), verdict(false, 0.1, false),
                                         verdict(false, 0.2, false)};
  const auto m = metrics::evaluate(v);
  EXPECT_EQ(m, (metrics::AttackMetrics{1.0, 1.0, 1.0, 1.0, 1.0}));
}

TEST(Metrics, HandComputedExample) {
  // tp 2, fp 1, fn 1, tn 2.
  const std::vector<MembershipVerdict> v{verdict(true, 0.9, true),  verdict(true, 0.7, true),
                                         verdict(false, 0.4, true), verdict(true, 0.6, false),
                                         verdict(false, 0.2, false), verdict(false, 0.4, false)};
  const auto m = metrics::evaluate(v);
  EXPECT_DOUBLE_EQ(m.accuracy, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
  // Pairs: 0.9 and 0.7 beat all three; 0.4 beats 0.2, ties 0.4, loses to 0.6.
  EXPECT_DOUBLE_EQ(m.auc, (3 + 3 + 1 + 0.5) / 9.0);
}

TEST(Metrics, NoPositiveDecisionsGiveZeroPrecision) {
  const std::vector<MembershipVerdict> v{verdict(false, 0.3, true), verdict(false, 0.1, false)};
  const auto m = metrics::evaluate(v);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.accuracy, 0.5);
}

TEST(Metrics, DecisionsIndependentOfTruthAreNearChance) {
  Rng rng(1);
  std::vector<MembershipVerdict> v;
  for (int i = 0; i < 2000; ++i) v.push_back(verdict(rng() % 2 == 0, 0.5, i % 2 == 0));
  EXPECT_NEAR(metrics::accuracy(v), 0.5, 0.05);
}

TEST(Metrics, AucMatchesPairwiseOracle) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> pos(1 + rng() % 30), neg(1 + rng() % 30);
    for (auto& s : pos) s = static_cast<double>(rng() % 7) / 7.0;
    for (auto& s : neg) s = static_cast<double>(rng() % 7) / 7.0;
    EXPECT_EQ(metrics::auc(pos, neg), testkit::pairwise_auc(pos, neg));
  }
}

TEST(Metrics, ErrorPaths) {
  std::vector<MembershipVerdict> v{verdict(true, 0.9, true), verdict(false, 0.1, false)};
  v[0].truth.reset();
  EXPECT_THROW(metrics::evaluate(v), InvalidInput);
  v[0].truth = true;
  v[1].score.reset();
  EXPECT_THROW(metrics::evaluate(v), InvalidInput);
  const std::vector<MembershipVerdict> one_class{verdict(true, 0.9, true), verdict(false, 0.1, true)};
  EXPECT_THROW(metrics::auc(one_class), InvalidInput);
  EXPECT_THROW(metrics::accuracy({}), InvalidInput);
}

TEST(Config, ParsesDocumentedDefaults) {
  const auto s = tiny();
  EXPECT_EQ(s.name, "tiny");
  EXPECT_EQ(s.shadow_mode, ShadowData::same);
  EXPECT_EQ(s.shadow.model.widths, s.target.model.widths);
  EXPECT_EQ(s.attacks.size(), 4u);
  EXPECT_EQ(s.attack_epochs, 10u);
  EXPECT_FALSE(s.attack_batch_size.has_value());
  EXPECT_EQ(s.bins, 10u);
  EXPECT_EQ(s.label_only_budget, 600u);
  EXPECT_EQ(parse_scenario("attacks: all\n").attacks, attacks::standard_attacks());
}

TEST(Config, JsonRoundTrip) {
  const auto s = tiny("defense: {kind: dpsgd, sigma: 0.5, clip: 2.0}\nsweep: [none, {kind: label_smoothing}]\n");
  const auto j = scenario_to_json(s);
  EXPECT_EQ(scenario_to_json(scenario_from_json(j)), j);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_scenario("name: [unclosed\n"), ConfigError);
  EXPECT_THROW(parse_scenario(""), ConfigError);
  EXPECT_THROW(parse_scenario("nmae: typo\n"), ConfigError);
  EXPECT_THROW(parse_scenario("attacks: [nn_top3, magic]\n"), ConfigError);
  EXPECT_THROW(parse_scenario("attacks: []\n"), ConfigError);
  EXPECT_THROW(parse_scenario("seed: abc\n"), ConfigError);
  EXPECT_THROW(parse_scenario("data: {target: {kind: mystery}}\n"), ConfigError);
  EXPECT_THROW(parse_scenario("data: {target: {kind: csv}}\n"), ConfigError);
  EXPECT_THROW(parse_scenario("defense: {kind: dpsgd, clip: 0}\n"), ConfigError);
  EXPECT_THROW(parse_scenario("risk: {calibration: nope}\n"), ConfigError);
  EXPECT_THROW(parse_scenario("attack: {label_only_budget: 5}\n"), ConfigError);
  EXPECT_THROW(parse_scenario("target: {recipe: {batch_size: 0}}\n"), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/config.yaml"), ConfigError);
}

TEST(Config, QuotedScalarsStayStrings) {
  const auto j = yaml_to_json("a: '12'\nb: 12\nc: 1.5\nd: true\ne: -3\n");
  EXPECT_TRUE(j["a"].is_string());
  EXPECT_TRUE(j["b"].is_number_unsigned());
  EXPECT_TRUE(j["c"].is_number_float());
  EXPECT_TRUE(j["d"].is_boolean());
  EXPECT_EQ(j["e"].get<int>(), -3);
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& entry : std::filesystem::directory_iterator("configs")) {
    if (entry.path().extension() != ".yaml") continue;
    EXPECT_NO_THROW(load_scenario(entry.path())) << entry.path();
  }
}

TEST(PreparedData, EvaluationSetsAreBalancedAndDisjoint) {
  const auto d = prepare_data(tiny());
  const auto& m = d.target_plan[data::Part::target_train];
  const auto& n = d.target_plan[data::Part::target_test];
  EXPECT_EQ(m.size(), n.size());
  std::set<std::size_t> ms(m.begin(), m.end());
  for (auto i : n) EXPECT_FALSE(ms.count(i));
  EXPECT_EQ(d.seeds.scenario, 5u);
  EXPECT_NE(d.seeds.target_training, d.seeds.shadow_training);
}

TEST(RunScenario, ProducesCompleteReport) {
  const auto r = run_scenario(tiny());
  EXPECT_TRUE(r.ok()) << (r.errors.empty() ? "" : r.errors[0].message);
  ASSERT_EQ(r.attacks.size(), 4u);
  EXPECT_EQ(r.eval_members, r.eval_nonmembers);
  EXPECT_EQ(r.eval_members, 20u);
  for (const auto& a : r.attacks) {
    ASSERT_TRUE(a.metrics.has_value()) << a.attack;
    for (double v : {a.metrics->accuracy, a.metrics->precision, a.metrics->recall, a.metrics->f1, a.metrics->auc}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  ASSERT_TRUE(r.best_attack.has_value());
  double best = 0.0;
  std::string first_best;
  for (const auto& a : r.attacks)
    if (a.metrics->accuracy > best) {
      best = a.metrics->accuracy;
      first_best = a.attack;
    }
  EXPECT_EQ(*r.best_attack, first_best);
  EXPECT_EQ(r.best_accuracy, best);
  EXPECT_GE(r.js_entropy, 0.0);
  EXPECT_LE(r.js_entropy, 1.0);
  EXPECT_GE(r.estimated_risk, 0.5);
  EXPECT_EQ(r.target_defense, "none");
}

TEST(RunScenario, SameSeedGivesIdenticalReport) {
  const auto s = tiny();
  EXPECT_EQ(json_lines({run_scenario(s)}), json_lines({run_scenario(s)}));
  auto other = s;
  other.seed = 6;
  EXPECT_NE(json_lines({run_scenario(s)}), json_lines({run_scenario(other)}));
}

TEST(RunScenario, DifferentShadowArchitectureRunsAndIsEchoed) {
  const auto r = run_scenario(tiny("shadow:\n  model: {kind: mlp, widths: [8, 8]}\n"));
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.scenario["target"]["model"]["widths"], nlohmann::json({16}));
  EXPECT_EQ(r.scenario["shadow"]["model"]["widths"], nlohmann::json({8, 8}));
}

TEST(RunScenario, AdaptiveShadowCarriesTheTargetDefense) {
  const auto adaptive = run_scenario(tiny("defense: {kind: label_smoothing, epsilon: 0.3}\nadaptive: true\n"));
  EXPECT_EQ(adaptive.shadow_defense, adaptive.target_defense);
  EXPECT_EQ(adaptive.target_defense, "label_smoothing");
  const auto plain = run_scenario(tiny("defense: {kind: label_smoothing, epsilon: 0.3}\n"));
  EXPECT_EQ(plain.shadow_defense, "none");
}

TEST(RunScenario, MemGuardKeepsTargetLabels) {
  const auto s = tiny("defense: {kind: memguard}\n");
  const auto d = prepare_data(s);
  const auto served = train_side(s, d, Side::target);
  ASSERT_TRUE(served.memguard.has_value());
  for (auto i : d.target_plan[data::Part::target_test]) {
    EXPECT_EQ(nn::argmax(served.query(d.target.samples[i])), nn::argmax(zoo::query(served.model, d.target.samples[i])));
  }
}

TEST(RunScenario, AttackFailuresAreIsolated) {
  // A 2-class shadow cannot feed an attack model over 3-class target posteriors.
  auto s = tiny("  shadow: {kind: gaussian, classes: 2, dim: 4, per_class: 60, separation: 2.0, mean_shift: 0.5}\n");
  s.attacks = {attacks::AttackKind::nn_normal, attacks::AttackKind::nn_top3, attacks::AttackKind::metric_corr};
  const auto r = run_scenario(s);
  ASSERT_EQ(r.attacks.size(), 3u);
  EXPECT_TRUE(r.attacks[0].error.has_value());
  EXPECT_EQ(r.attacks[0].stage, "attack");
  EXPECT_TRUE(r.attacks[1].metrics.has_value());
  EXPECT_TRUE(r.attacks[2].metrics.has_value());
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.errors.size(), 1u);
}

TEST(RunScenario, DataFailureSkipsEveryAttack) {
  const auto r = run_scenario(tiny("  shadow: {kind: csv, path: /nonexistent/shadow.csv}\n"));
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].stage, "data");
  for (const auto& a : r.attacks) {
    EXPECT_TRUE(a.error.has_value());
    EXPECT_FALSE(a.metrics.has_value());
  }
}

TEST(Report, JsonRoundTrip) {
  auto r = run_scenario(tiny());
  r.wall_clock_seconds = 1.25;
  const auto back = report_from_json(report_to_json(r, {.include_wall_clock = true}));
  EXPECT_EQ(back, r);
  std::istringstream in(json_lines({r}, {.include_wall_clock = true}));
  EXPECT_EQ(read_json_lines(in), std::vector<ExperimentReport>{r});
}

TEST(Report, WallClockIsLeftOutByDefault) {
  auto r = run_scenario(tiny());
  EXPECT_FALSE(report_to_json(r).contains("wall_clock_seconds"));
  r.wall_clock_seconds = 0.0;
  EXPECT_EQ(report_from_json(report_to_json(r)), r);
  EXPECT_EQ(ledger_json(std::vector<ExperimentReport>{r})["runs"][0]["seeds"]["scenario"], 5u);
}

TEST(Report, MalformedInputThrows) {
  std::istringstream bad("{not json}\n");
  EXPECT_THROW(read_json_lines(bad), FormatError);
  EXPECT_THROW(report_from_json(nlohmann::json{{"name", "x"}}), FormatError);
}

TEST(Report, CsvHeaderMatchesGoldenFile) {
  std::ifstream golden("tests/golden/report_header.csv");
  ASSERT_TRUE(golden.good());
  std::string expected;
  std::getline(golden, expected);
  EXPECT_EQ(std::string(kCsvHeader), expected);
  std::ostringstream out;
  write_csv(out, std::vector<ExperimentReport>{});
  EXPECT_EQ(out.str(), expected + "\n");
}

TEST(Report, CsvHasOneRowPerAttack) {
  const auto r = run_scenario(tiny());
  std::ostringstream out;
  write_csv(out, std::vector<ExperimentReport>{r});
  std::istringstream in(out.str());
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 15) << line;
  }
  EXPECT_EQ(rows, r.attacks.size());
}

TEST(Report, SweepPlotDataHasOneRowPerPointAndSeries) {
  auto s = tiny(
      "sweep:\n"
      "  - {kind: dpsgd, sigma: 0.0001}\n  - {kind: dpsgd, sigma: 0.001}\n  - {kind: dpsgd, sigma: 0.01}\n"
      "  - {kind: dpsgd, sigma: 0.1}\n  - {kind: dpsgd, sigma: 1.0}\n");
  s.attacks = {attacks::AttackKind::metric_corr, attacks::AttackKind::metric_conf};
  const auto scenarios = expand_sweep(s);
  ASSERT_EQ(scenarios.size(), 5u);
  EXPECT_EQ(scenarios[3].name, "tiny[3]");
  const auto reports = run_scenarios(scenarios, 3);
  std::ostringstream out;
  write_plot_data(out, reports);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "series,x,y");
  std::map<std::string, int> per_series;
  while (std::getline(in, line)) ++per_series[line.substr(0, line.find(','))];
  EXPECT_EQ(per_series, (std::map<std::string, int>{{"best", 5}, {"metric_conf", 5}, {"metric_corr", 5}}));
}

TEST(Report, ParallelSweepMatchesSequential) {
  auto s = tiny("sweep: [none, {kind: label_smoothing, epsilon: 0.5}, {kind: dpsgd, sigma: 0.1}]\n");
  s.attacks = {attacks::AttackKind::metric_conf};
  const auto scenarios = expand_sweep(s);
  EXPECT_EQ(json_lines(run_scenarios(scenarios, 1)), json_lines(run_scenarios(scenarios, 3)));
}

TEST(Report, UnwritablePathThrowsIoError) {
  EXPECT_THROW(emit_report("/nonexistent_dir/report.jsonl", std::vector<ExperimentReport>{}, ReportFormat::json_lines),
               IoError);
}

TEST(EpochSweep, OnePointPerSnapshot) {
  auto s = tiny();
  s.target.recipe.epochs = 6;
  s.shadow.recipe.epochs = 6;
  const auto points = epoch_sweep(s, 2, attacks::AttackKind::metric_conf);
  ASSERT_EQ(points.size(), 3u);
  EXPECT_EQ(points[2].epoch, 6u);
  for (const auto& p : points) {
    EXPECT_NEAR(p.overfitting, p.train_accuracy - p.test_accuracy, 1e-15);
    EXPECT_GE(p.attack_accuracy, 0.0);
  }
  EXPECT_THROW(epoch_sweep(s, 0, attacks::AttackKind::metric_conf), InvalidInput);
}
