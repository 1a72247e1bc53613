#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "membench/metrics.hpp"
#include "membench/riskmeter.hpp"

namespace membench::harness {

struct AttackResult {
  std::string attack;
  std::optional<metrics::AttackMetrics> metrics;
  double attack_training_accuracy = -1.0;
  std::size_t flagged = 0;  // verdicts flagged by the attack (label-only: no flip found)
  std::string stage;        // failing stage when `error` is set
  std::optional<std::string> error;

  bool operator==(const AttackResult&) const = default;
};

struct StageError {
  std::string stage;
  std::string message;

  bool operator==(const StageError&) const = default;
};

struct SeedLedger {
  std::uint64_t scenario = 0;
  std::uint64_t target_data = 0;
  std::uint64_t shadow_data = 0;
  std::uint64_t split = 0;
  std::uint64_t target_training = 0;
  std::uint64_t shadow_training = 0;
  std::uint64_t attacks = 0;
  std::uint64_t memguard = 0;

  bool operator==(const SeedLedger&) const = default;
};

struct ExperimentReport {
  std::string name;
  nlohmann::json scenario;  // normalized config echo
  std::string target_defense;
  std::string shadow_defense;
  double target_train_accuracy = 0.0;
  double target_test_accuracy = 0.0;
  double shadow_train_accuracy = 0.0;
  double shadow_test_accuracy = 0.0;
  std::size_t eval_members = 0;
  std::size_t eval_nonmembers = 0;
  std::vector<AttackResult> attacks;
  std::optional<std::string> best_attack;
  double best_accuracy = 0.0;
  double overfitting = 0.0;
  std::vector<risk::ClassGap> overfitting_per_class;
  double js_entropy = 0.0;
  double js_cross_entropy = 0.0;
  std::size_t bins = risk::kDefaultBins;
  std::string calibration_name;
  risk::Calibration calibration;
  double estimated_risk = 0.0;
  SeedLedger seeds;
  std::vector<StageError> errors;
  double wall_clock_seconds = 0.0;

  bool ok() const { return errors.empty(); }
  bool operator==(const ExperimentReport&) const = default;
};

struct EmitOptions {
  // Off by default so identical runs give identical bytes; timing goes to the ledger file.
  bool include_wall_clock = false;
};

nlohmann::json report_to_json(const ExperimentReport& r, const EmitOptions& options = {});
ExperimentReport report_from_json(const nlohmann::json& j);

// One compact JSON document per line.
void write_json_lines(std::ostream& out, std::span<const ExperimentReport> reports, const EmitOptions& options = {});
std::vector<ExperimentReport> read_json_lines(std::istream& in);

// One row per (scenario, attack).
extern const char* const kCsvHeader;
void write_csv(std::ostream& out, std::span<const ExperimentReport> reports);

// series,x,y with x = target test accuracy and y = attack accuracy. One
// series per attack plus "best".
void write_plot_data(std::ostream& out, std::span<const ExperimentReport> reports);

// Seeds, wall-clock and build version of each run.
nlohmann::json ledger_json(std::span<const ExperimentReport> reports);

enum class ReportFormat { json_lines, csv, plot_data, ledger };

// Throws IoError when the path cannot be written.
void emit_report(const std::filesystem::path& path, std::span<const ExperimentReport> reports, ReportFormat format,
                 const EmitOptions& options = {});

}  // namespace membench::harness
