#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "membench/attacks.hpp"
#include "membench/defenses.hpp"
#include "membench/modelzoo.hpp"
#include "membench/report.hpp"

namespace membench::harness {

enum class SourceKind { gaussian, raster, csv, raw_raster };

const char* source_kind_name(SourceKind kind);
SourceKind parse_source_kind(const std::string& name);

struct DataSource {
  SourceKind kind = SourceKind::gaussian;
  // gaussian
  std::size_t classes = 4;
  std::size_t dim = 10;
  std::size_t per_class = 300;
  double separation = 2.0;
  double mean_shift = 0.0;
  // raster
  std::size_t channels = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  double contrast = 0.5;
  double noise = 0.25;
  // csv / raw_raster
  std::filesystem::path path;
  // Falls back to a seed derived from the scenario seed when unset.
  std::optional<std::uint64_t> seed;

  bool operator==(const DataSource&) const = default;
};

data::Dataset load_source(const DataSource& source, std::uint64_t fallback_seed);

enum class ShadowData { same, different, file };

struct SideConfig {
  zoo::ModelSpec model;
  nn::TrainRecipe recipe;
  data::AugMode augmentation;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  DataSource target_data;
  ShadowData shadow_mode = ShadowData::same;
  DataSource shadow_data;  // used unless shadow_mode is same
  SideConfig target;
  SideConfig shadow;
  defenses::DefenseConfig defense;
  bool adaptive = false;
  std::vector<attacks::AttackKind> attacks = attacks::standard_attacks();
  // Attack-model epochs and batch size default to the shadow recipe's.
  std::optional<std::size_t> attack_epochs;
  std::optional<std::size_t> attack_batch_size;
  std::size_t label_only_budget = 600;
  std::size_t augment_views = 10;
  attacks::MentVariant ment_variant = attacks::MentVariant::as_printed;
  std::size_t bins = risk::kDefaultBins;
  std::string calibration = "sorted";
  // Defense variants for defend-sweep; empty means the single `defense`.
  std::vector<defenses::DefenseConfig> sweep;

  // Throws ConfigError.
  void validate() const;
};

// The config document: the YAML text maps onto this JSON schema.
nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json yaml_to_json(const std::string& yaml_text);
Scenario parse_scenario(const std::string& yaml_text);
Scenario load_scenario(const std::filesystem::path& path);

// Datasets, split and derived seeds for one scenario.
struct PreparedData {
  data::Dataset target;
  data::Dataset shadow_storage;  // empty when the shadow shares the target dataset
  data::SplitPlan target_plan;
  data::SplitPlan shadow_plan;
  SeedLedger seeds;

  const data::Dataset& shadow() const;
};

PreparedData prepare_data(const Scenario& s);

// Trained target plus the served oracle (MemGuard-wrapped when configured).
struct ServedModel {
  zoo::TrainedModel model;
  std::optional<zoo::TrainedModel> surrogate;  // MemGuard defender's attack model
  std::optional<defenses::MemGuard> memguard;
  std::uint64_t memguard_seed = 0;

  nn::Posteriors query(const nn::Tensor& x) const;
  attacks::PosteriorOracle oracle() const;
};

enum class Side { target, shadow };

ServedModel train_side(const Scenario& s, const PreparedData& d, Side side,
                       const zoo::EpochCallback& on_epoch = {});

// Attaches a MemGuard wrapper to an already trained model when the side's
// defense calls for one. Surrogate is trained on train vs reference posteriors.
ServedModel serve(const Scenario& s, const PreparedData& d, Side side, zoo::TrainedModel model);

attacks::AttackOptions attack_options(const Scenario& s, const PreparedData& d);

using VerdictSink = std::function<void(const std::string& attack, const std::vector<attacks::MembershipVerdict>&)>;

// Split, train, calibrate attacks on the shadow, attack the target, measure.
// Stage failures are recorded in the report rather than thrown.
ExperimentReport run_scenario(const Scenario& s, const VerdictSink& sink = {});

struct EpochPoint {
  std::size_t epoch = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double overfitting = 0.0;
  double js_entropy = 0.0;
  double js_cross_entropy = 0.0;
  double attack_accuracy = 0.0;
};

// Trains target and shadow once, snapshotting both every `every` epochs; at
// each snapshot the attack is calibrated on the shadow snapshot and run on the
// target snapshot.
std::vector<EpochPoint> epoch_sweep(const Scenario& s, std::size_t every, attacks::AttackKind attack);

// One scenario per sweep entry (or the scenario itself), run on worker
// threads; output order follows the input.
std::vector<Scenario> expand_sweep(const Scenario& s);
std::vector<ExperimentReport> run_scenarios(const std::vector<Scenario>& scenarios, std::size_t threads);

}  // namespace membench::harness
