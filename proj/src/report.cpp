#include "membench/report.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "membench/error.hpp"
#include "membench/version.hpp"

using nlohmann::json;

namespace membench::harness {

namespace {

json metrics_json(const metrics::AttackMetrics& m) {
  return json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
              {"f1", m.f1},             {"auc", m.auc}};
}

metrics::AttackMetrics metrics_from(const json& j) {
  metrics::AttackMetrics m;
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.auc = j.at("auc").get<double>();
  return m;
}

json seeds_json(const SeedLedger& s) {
  return json{{"scenario", s.scenario},
              {"target_data", s.target_data},
              {"shadow_data", s.shadow_data},
              {"split", s.split},
              {"target_training", s.target_training},
              {"shadow_training", s.shadow_training},
              {"attacks", s.attacks},
              {"memguard", s.memguard}};
}

SeedLedger seeds_from(const json& j) {
  SeedLedger s;
  s.scenario = j.at("scenario").get<std::uint64_t>();
  s.target_data = j.at("target_data").get<std::uint64_t>();
  s.shadow_data = j.at("shadow_data").get<std::uint64_t>();
  s.split = j.at("split").get<std::uint64_t>();
  s.target_training = j.at("target_training").get<std::uint64_t>();
  s.shadow_training = j.at("shadow_training").get<std::uint64_t>();
  s.attacks = j.at("attacks").get<std::uint64_t>();
  s.memguard = j.at("memguard").get<std::uint64_t>();
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string num(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

}  // namespace

json report_to_json(const ExperimentReport& r, const EmitOptions& options) {
  json attacks = json::array();
  for (const auto& a : r.attacks) {
    json ja{{"attack", a.attack}, {"attack_training_accuracy", a.attack_training_accuracy}, {"flagged", a.flagged}};
    if (a.metrics) ja["metrics"] = metrics_json(*a.metrics);
    if (a.error) {
      ja["error"] = *a.error;
      ja["stage"] = a.stage;
    }
    attacks.push_back(std::move(ja));
  }
  json per_class = json::array();
  for (const auto& g : r.overfitting_per_class) {
    per_class.push_back(
        {{"label", g.label}, {"train_accuracy", g.train_accuracy}, {"test_accuracy", g.test_accuracy}, {"gap", g.gap}});
  }
  json errors = json::array();
  for (const auto& e : r.errors) errors.push_back({{"stage", e.stage}, {"message", e.message}});

  json j{{"name", r.name},
         {"scenario", r.scenario},
         {"target_defense", r.target_defense},
         {"shadow_defense", r.shadow_defense},
         {"target_train_accuracy", r.target_train_accuracy},
         {"target_test_accuracy", r.target_test_accuracy},
         {"shadow_train_accuracy", r.shadow_train_accuracy},
         {"shadow_test_accuracy", r.shadow_test_accuracy},
         {"eval_members", r.eval_members},
         {"eval_nonmembers", r.eval_nonmembers},
         {"attacks", std::move(attacks)},
         {"best_attack", r.best_attack ? json(*r.best_attack) : json(nullptr)},
         {"best_accuracy", r.best_accuracy},
         {"overfitting", r.overfitting},
         {"overfitting_per_class", std::move(per_class)},
         {"js_entropy", r.js_entropy},
         {"js_cross_entropy", r.js_cross_entropy},
         {"js_conventions", {{"bins", r.bins}, {"log_base", 2}, {"distance", "sqrt_divergence"}}},
         {"calibration",
          {{"name", r.calibration_name},
           {"slope", r.calibration.slope},
           {"intercept", r.calibration.intercept},
           {"r", r.calibration.r}}},
         {"estimated_risk", r.estimated_risk},
         {"seeds", seeds_json(r.seeds)},
         {"errors", std::move(errors)}};
  if (options.include_wall_clock) j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j;
}

ExperimentReport report_from_json(const json& j) {
  try {
    ExperimentReport r;
    r.name = j.at("name").get<std::string>();
    r.scenario = j.at("scenario");
    r.target_defense = j.at("target_defense").get<std::string>();
    r.shadow_defense = j.at("shadow_defense").get<std::string>();
    r.target_train_accuracy = j.at("target_train_accuracy").get<double>();
    r.target_test_accuracy = j.at("target_test_accuracy").get<double>();
    r.shadow_train_accuracy = j.at("shadow_train_accuracy").get<double>();
    r.shadow_test_accuracy = j.at("shadow_test_accuracy").get<double>();
    r.eval_members = j.at("eval_members").get<std::size_t>();
    r.eval_nonmembers = j.at("eval_nonmembers").get<std::size_t>();
    for (const auto& ja : j.at("attacks")) {
      AttackResult a;
      a.attack = ja.at("attack").get<std::string>();
      a.attack_training_accuracy = ja.at("attack_training_accuracy").get<double>();
      a.flagged = ja.at("flagged").get<std::size_t>();
      if (ja.contains("metrics")) a.metrics = metrics_from(ja.at("metrics"));
      if (ja.contains("error")) {
        a.error = ja.at("error").get<std::string>();
        a.stage = ja.at("stage").get<std::string>();
      }
      r.attacks.push_back(std::move(a));
    }
    if (!j.at("best_attack").is_null()) r.best_attack = j.at("best_attack").get<std::string>();
    r.best_accuracy = j.at("best_accuracy").get<double>();
    r.overfitting = j.at("overfitting").get<double>();
    for (const auto& g : j.at("overfitting_per_class")) {
      r.overfitting_per_class.push_back({g.at("label").get<int>(), g.at("train_accuracy").get<double>(),
                                         g.at("test_accuracy").get<double>(), g.at("gap").get<double>()});
    }
    r.js_entropy = j.at("js_entropy").get<double>();
    r.js_cross_entropy = j.at("js_cross_entropy").get<double>();
    r.bins = j.at("js_conventions").at("bins").get<std::size_t>();
    const auto& cal = j.at("calibration");
    r.calibration_name = cal.at("name").get<std::string>();
    r.calibration = {cal.at("slope").get<double>(), cal.at("intercept").get<double>(), cal.at("r").get<double>()};
    r.estimated_risk = j.at("estimated_risk").get<double>();
    r.seeds = seeds_from(j.at("seeds"));
    for (const auto& e : j.at("errors")) r.errors.push_back({e.at("stage").get<std::string>(), e.at("message").get<std::string>()});
    if (j.contains("wall_clock_seconds")) r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

void write_json_lines(std::ostream& out, std::span<const ExperimentReport> reports, const EmitOptions& options) {
  for (const auto& r : reports) out << report_to_json(r, options).dump() << '\n';
}

std::vector<ExperimentReport> read_json_lines(std::istream& in) {
  std::vector<ExperimentReport> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(n) + ": " + e.what());
    }
    out.push_back(report_from_json(j));
  }
  return out;
}

const char* const kCsvHeader =
    "scenario,target_defense,shadow_defense,attack,accuracy,precision,recall,f1,auc,"
    "target_train_accuracy,target_test_accuracy,overfitting,js_entropy,js_cross_entropy,estimated_risk,error";

void write_csv(std::ostream& out, std::span<const ExperimentReport> reports) {
  out << kCsvHeader << '\n';
  for (const auto& r : reports) {
    for (const auto& a : r.attacks) {
      out << csv_field(r.name) << ',' << csv_field(r.target_defense) << ',' << csv_field(r.shadow_defense) << ','
          << csv_field(a.attack) << ',';
      if (a.metrics) {
        out << num(a.metrics->accuracy) << ',' << num(a.metrics->precision) << ',' << num(a.metrics->recall) << ','
            << num(a.metrics->f1) << ',' << num(a.metrics->auc) << ',';
      } else {
        out << ",,,,,";
      }
      out << num(r.target_train_accuracy) << ',' << num(r.target_test_accuracy) << ',' << num(r.overfitting) << ','
          << num(r.js_entropy) << ',' << num(r.js_cross_entropy) << ',' << num(r.estimated_risk) << ','
          << csv_field(a.error ? a.stage + ": " + *a.error : "") << '\n';
    }
  }
}

void write_plot_data(std::ostream& out, std::span<const ExperimentReport> reports) {
  out << "series,x,y\n";
  for (const auto& r : reports) {
    for (const auto& a : r.attacks) {
      if (a.metrics) out << csv_field(a.attack) << ',' << num(r.target_test_accuracy) << ',' << num(a.metrics->accuracy) << '\n';
    }
    if (r.best_attack) out << "best," << num(r.target_test_accuracy) << ',' << num(r.best_accuracy) << '\n';
  }
}

json ledger_json(std::span<const ExperimentReport> reports) {
  json runs = json::array();
  for (const auto& r : reports) {
    runs.push_back({{"name", r.name},
                    {"seeds", seeds_json(r.seeds)},
                    {"wall_clock_seconds", r.wall_clock_seconds},
                    {"ok", r.ok()}});
  }
  return json{{"version", kVersion}, {"runs", std::move(runs)}};
}

void emit_report(const std::filesystem::path& path, std::span<const ExperimentReport> reports, ReportFormat format,
                 const EmitOptions& options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  switch (format) {
    case ReportFormat::json_lines: write_json_lines(out, reports, options); break;
    case ReportFormat::csv: write_csv(out, reports); break;
    case ReportFormat::plot_data: write_plot_data(out, reports); break;
    case ReportFormat::ledger: out << ledger_json(reports).dump(2) << '\n'; break;
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace membench::harness
