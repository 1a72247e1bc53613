// membench command-line driver.
//
//   membench train        --config s.yaml --out model.bin [--side target|shadow]
//   membench attack       --config s.yaml --out report.jsonl [--csv f] [--plot f] [--verdicts dir]
//   membench defend-sweep --config s.yaml --out report.jsonl [--csv f] [--plot f] [--threads n]
//   membench estimate     (--js x | --config s.yaml) [--preset sorted|posterior_label]
//   membench report       --in report.jsonl [--csv f] [--plot f]
//
// Exit codes: 0 success, 2 config error, 3 stage failure (partial report written).

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "membench/error.hpp"
#include "membench/riskmeter.hpp"
#include "membench/scenario.hpp"
#include "membench/serialize.hpp"
#include "membench/version.hpp"

namespace fs = std::filesystem;
using namespace membench;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;

struct Outputs {
  std::string out;
  std::string csv;
  std::string plot;
  std::string ledger;
};

void add_outputs(CLI::App* cmd, Outputs& o) {
  cmd->add_option("--out", o.out, "JSON-lines report")->required();
  cmd->add_option("--csv", o.csv, "CSV summary");
  cmd->add_option("--plot", o.plot, "plot-data CSV (series,x,y)");
  cmd->add_option("--ledger", o.ledger, "seed ledger (default: <out>.ledger.json)");
}

int write_outputs(const Outputs& o, const std::vector<harness::ExperimentReport>& reports) {
  using harness::ReportFormat;
  harness::emit_report(o.out, reports, ReportFormat::json_lines);
  if (!o.csv.empty()) harness::emit_report(o.csv, reports, ReportFormat::csv);
  if (!o.plot.empty()) harness::emit_report(o.plot, reports, ReportFormat::plot_data);
  harness::emit_report(o.ledger.empty() ? o.out + ".ledger.json" : o.ledger, reports, ReportFormat::ledger);
  bool ok = true;
  for (const auto& r : reports) {
    std::cerr << r.name << ": target train " << r.target_train_accuracy << " test " << r.target_test_accuracy;
    if (r.best_attack) std::cerr << ", best attack " << *r.best_attack << " " << r.best_accuracy;
    std::cerr << '\n';
    for (const auto& e : r.errors) std::cerr << "  error [" << e.stage << "] " << e.message << '\n';
    ok = ok && r.ok();
  }
  return ok ? 0 : kStageFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Membership inference benchmark"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config;
  Outputs outputs;

  auto* train = app.add_subcommand("train", "train the target (or shadow) model of a scenario");
  std::string model_out, side = "target";
  train->add_option("--config", config, "scenario config")->required()->check(CLI::ExistingFile);
  train->add_option("--out", model_out, "checkpoint path (metadata goes to <out>.json)")->required();
  train->add_option("--side", side, "target or shadow")->check(CLI::IsMember({"target", "shadow"}));

  auto* attack = app.add_subcommand("attack", "run a scenario end to end");
  std::string verdict_dir;
  attack->add_option("--config", config, "scenario config")->required()->check(CLI::ExistingFile);
  add_outputs(attack, outputs);
  attack->add_option("--verdicts", verdict_dir, "directory for per-attack verdict CSVs");

  auto* sweep = app.add_subcommand("defend-sweep", "run every defense listed under `sweep`");
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  sweep->add_option("--config", config, "scenario config")->required()->check(CLI::ExistingFile);
  add_outputs(sweep, outputs);
  sweep->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* estimate = app.add_subcommand("estimate", "attack-free risk estimate from the JS distance of entropies");
  std::optional<double> js, slope, intercept;
  std::string preset = "sorted";
  auto* js_opt = estimate->add_option("--js", js, "JS distance (skips training)");
  estimate->add_option("--config", config, "scenario config; trains the target and measures JS")
      ->check(CLI::ExistingFile)
      ->excludes(js_opt);
  estimate->add_option("--preset", preset, "calibration preset")->check(CLI::IsMember({"sorted", "posterior_label"}));
  estimate->add_option("--slope", slope, "custom calibration slope");
  estimate->add_option("--intercept", intercept, "custom calibration intercept");

  auto* report = app.add_subcommand("report", "convert a JSON-lines report to CSV / plot data");
  std::string report_in;
  report->add_option("--in", report_in, "JSON-lines report")->required()->check(CLI::ExistingFile);
  report->add_option("--csv", outputs.csv, "CSV summary");
  report->add_option("--plot", outputs.plot, "plot-data CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto s = harness::load_scenario(config);
      const auto d = harness::prepare_data(s);
      const auto served = harness::train_side(s, d, side == "target" ? harness::Side::target : harness::Side::shadow);
      zoo::save_model(model_out, served.model);
      json summary{{"side", side}, {"model", model_out}, {"defense", served.model.defense_tag()}};
      if (!served.model.history.empty()) summary["final_epoch"] = served.model.history.back();
      std::cout << summary.dump() << '\n';
      return 0;
    }
    if (*attack) {
      const auto s = harness::load_scenario(config);
      harness::VerdictSink sink;
      if (!verdict_dir.empty()) {
        fs::create_directories(verdict_dir);
        sink = [&](const std::string& name, const std::vector<attacks::MembershipVerdict>& v) {
          std::ofstream out(fs::path(verdict_dir) / (name + ".csv"));
          if (!out) throw IoError("cannot write verdicts for " + name);
          attacks::write_verdicts_csv(out, v);
        };
      }
      return write_outputs(outputs, {harness::run_scenario(s, sink)});
    }
    if (*sweep) {
      const auto s = harness::load_scenario(config);
      if (s.sweep.empty()) throw ConfigError("config has no `sweep` list");
      return write_outputs(outputs, harness::run_scenarios(harness::expand_sweep(s), threads));
    }
    if (*estimate) {
      risk::Calibration cal = risk::calibration_preset(preset);
      if (slope) cal.slope = *slope;
      if (intercept) cal.intercept = *intercept;
      json out{{"calibration", {{"slope", cal.slope}, {"intercept", cal.intercept}}}};
      if (!js) {
        if (config.empty()) throw ConfigError("estimate needs --js or --config");
        const auto s = harness::load_scenario(config);
        const auto d = harness::prepare_data(s);
        const auto target = harness::train_side(s, d, harness::Side::target);
        const attacks::SampleSet members{d.target, d.target_plan[data::Part::target_train]};
        const attacks::SampleSet nonmembers{d.target, d.target_plan[data::Part::target_test]};
        const auto dist =
            risk::score_distributions(target.oracle(), members, nonmembers, risk::ScoreMetric::entropy, s.bins);
        js = risk::js_distance(dist.members, dist.nonmembers);
        out["bins"] = s.bins;
      }
      out["js_entropy"] = *js;
      out["estimated_attack_accuracy"] = risk::estimate_risk(*js, cal);
      std::cout << out.dump() << '\n';
      return 0;
    }
    if (*report) {
      std::ifstream in(report_in);
      const auto reports = harness::read_json_lines(in);
      if (!outputs.csv.empty()) harness::emit_report(outputs.csv, reports, harness::ReportFormat::csv);
      if (!outputs.plot.empty()) harness::emit_report(outputs.plot, reports, harness::ReportFormat::plot_data);
      if (outputs.csv.empty() && outputs.plot.empty()) harness::write_csv(std::cout, reports);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageFailure;
  }
  return 0;
}
