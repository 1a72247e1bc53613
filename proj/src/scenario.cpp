#include "membench/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "membench/error.hpp"
#include "membench/metrics.hpp"
#include "membench/riskmeter.hpp"
#include "membench/serialize.hpp"

using nlohmann::json;

namespace membench::harness {

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a mapping");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

const char* ment_variant_name(attacks::MentVariant v) {
  return v == attacks::MentVariant::as_printed ? "as_printed" : "original";
}

attacks::MentVariant parse_ment_variant(const std::string& s) {
  if (s == "as_printed") return attacks::MentVariant::as_printed;
  if (s == "original") return attacks::MentVariant::original;
  throw ConfigError("unknown ment_variant '" + s + "'");
}

json source_to_json(const DataSource& d) {
  json j{{"kind", source_kind_name(d.kind)}};
  switch (d.kind) {
    case SourceKind::gaussian:
      j.update({{"classes", d.classes},
                {"dim", d.dim},
                {"per_class", d.per_class},
                {"separation", d.separation},
                {"mean_shift", d.mean_shift}});
      break;
    case SourceKind::raster:
      j.update({{"classes", d.classes},
                {"channels", d.channels},
                {"height", d.height},
                {"width", d.width},
                {"per_class", d.per_class},
                {"contrast", d.contrast},
                {"noise", d.noise}});
      break;
    case SourceKind::csv:
    case SourceKind::raw_raster:
      j["path"] = d.path.string();
      if (d.kind == SourceKind::csv) j["classes"] = d.classes;
      break;
  }
  if (d.seed) j["seed"] = *d.seed;
  return j;
}

DataSource source_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"kind", "classes", "dim", "per_class", "separation", "mean_shift", "channels", "height", "width",
                     "contrast", "noise", "path", "seed"},
                 where);
  DataSource d;
  std::string kind = source_kind_name(d.kind);
  read_opt(j, "kind", kind);
  d.kind = parse_source_kind(kind);
  read_opt(j, "classes", d.classes);
  read_opt(j, "dim", d.dim);
  read_opt(j, "per_class", d.per_class);
  read_opt(j, "separation", d.separation);
  read_opt(j, "mean_shift", d.mean_shift);
  read_opt(j, "channels", d.channels);
  read_opt(j, "height", d.height);
  read_opt(j, "width", d.width);
  read_opt(j, "contrast", d.contrast);
  read_opt(j, "noise", d.noise);
  std::string path;
  read_opt(j, "path", path);
  d.path = path;
  if (j.contains("seed") && !j["seed"].is_null()) {
    std::uint64_t seed = 0;
    read_opt(j, "seed", seed);
    d.seed = seed;
  }
  if ((d.kind == SourceKind::csv || d.kind == SourceKind::raw_raster) && d.path.empty()) {
    throw ConfigError(where + ": file source needs a path");
  }
  return d;
}

json side_to_json(const SideConfig& s) {
  return json{{"model", s.model}, {"recipe", s.recipe}, {"augmentation", s.augmentation}};
}

SideConfig side_from_json(const json& j, SideConfig base, const std::string& where) {
  reject_unknown(j, {"model", "recipe", "augmentation"}, where);
  if (j.contains("model")) base.model = j["model"].get<zoo::ModelSpec>();
  if (j.contains("recipe")) base.recipe = j["recipe"].get<nn::TrainRecipe>();
  if (j.contains("augmentation")) base.augmentation = j["augmentation"].get<data::AugMode>();
  return base;
}

// Fills input shape and class count from the data; explicit mismatches are errors.
zoo::ModelSpec resolve_spec(zoo::ModelSpec spec, const data::Dataset& ds, const char* side) {
  if (!spec.input_shape.empty() && spec.input_shape != ds.sample_shape()) {
    throw ConfigError(std::string(side) + " model input_shape " + nn::shape_str(spec.input_shape) +
                      " does not match data " + nn::shape_str(ds.sample_shape()));
  }
  spec.input_shape = ds.sample_shape();
  spec.num_classes = ds.num_classes;
  spec.validate();
  return spec;
}

json yaml_node_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& n : node) a.push_back(yaml_node_to_json(n));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : node) o[kv.first.as<std::string>()] = yaml_node_to_json(kv.second);
      return o;
    }
    case YAML::NodeType::Scalar: break;
  }
  const std::string s = node.Scalar();
  if (node.Tag() == "!") return s;  // quoted
  if (s == "true" || s == "True") return true;
  if (s == "false" || s == "False") return false;
  if (s == "null" || s == "~") return nullptr;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && s[0] == '-') {
    std::int64_t i = 0;
    if (auto r = std::from_chars(b, e, i); r.ec == std::errc() && r.ptr == e) return i;
  } else {
    std::uint64_t u = 0;
    if (auto r = std::from_chars(b, e, u); r.ec == std::errc() && r.ptr == e) return u;
  }
  double d = 0.0;
  if (auto r = std::from_chars(b, e, d); r.ec == std::errc() && r.ptr == e) return d;
  return s;
}

}  // namespace

const char* source_kind_name(SourceKind kind) {
  switch (kind) {
    case SourceKind::gaussian: return "gaussian";
    case SourceKind::raster: return "raster";
    case SourceKind::csv: return "csv";
    case SourceKind::raw_raster: return "raw_raster";
  }
  return "?";
}

SourceKind parse_source_kind(const std::string& name) {
  for (auto k : {SourceKind::gaussian, SourceKind::raster, SourceKind::csv, SourceKind::raw_raster}) {
    if (name == source_kind_name(k)) return k;
  }
  throw ConfigError("unknown data source kind '" + name + "'");
}

data::Dataset load_source(const DataSource& source, std::uint64_t fallback_seed) {
  const std::uint64_t seed = source.seed.value_or(fallback_seed);
  switch (source.kind) {
    case SourceKind::gaussian:
      return data::synth_gaussian(source.classes, source.dim, source.per_class, source.separation, seed,
                                  source.mean_shift);
    case SourceKind::raster:
      return data::synth_raster(source.classes, source.channels, source.height, source.width, source.per_class,
                                source.contrast, source.noise, seed);
    case SourceKind::csv: return data::load_dataset(source.path, data::DataFormat::csv, source.classes);
    case SourceKind::raw_raster: return data::load_dataset(source.path, data::DataFormat::raw_raster);
  }
  throw ConfigError("unknown data source");
}

void Scenario::validate() const {
  try {
    target.recipe.validate();
    shadow.recipe.validate();
    target.augmentation.validate();
    shadow.augmentation.validate();
    defenses::validate(defense);
    for (const auto& d : sweep) defenses::validate(d);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (attacks.empty()) throw ConfigError("no attacks requested");
  if (augment_views < 1) throw ConfigError("augment_views must be >= 1");
  if (label_only_budget < 10) throw ConfigError("label_only_budget must be >= 10");
  if (bins < 2) throw ConfigError("bins must be >= 2");
  if (attack_batch_size && *attack_batch_size == 0) throw ConfigError("attack batch_size must be positive");
  if (attack_epochs && *attack_epochs == 0) throw ConfigError("attack epochs must be positive");
  risk::calibration_preset(calibration);
}

json scenario_to_json(const Scenario& s) {
  json attack_list = json::array();
  for (auto a : s.attacks) attack_list.push_back(attacks::attack_name(a));
  json sweep = json::array();
  for (const auto& d : s.sweep) sweep.push_back(defenses::defense_to_json(d));
  json attack{{"label_only_budget", s.label_only_budget},
              {"augment_views", s.augment_views},
              {"ment_variant", ment_variant_name(s.ment_variant)}};
  if (s.attack_epochs) attack["epochs"] = *s.attack_epochs;
  if (s.attack_batch_size) attack["batch_size"] = *s.attack_batch_size;
  json j{{"name", s.name},
         {"seed", s.seed},
         {"data",
          {{"target", source_to_json(s.target_data)},
           {"shadow", s.shadow_mode == ShadowData::same ? json("same") : source_to_json(s.shadow_data)}}},
         {"target", side_to_json(s.target)},
         {"shadow", side_to_json(s.shadow)},
         {"defense", defenses::defense_to_json(s.defense)},
         {"adaptive", s.adaptive},
         {"attacks", attack_list},
         {"attack", attack},
         {"risk", {{"bins", s.bins}, {"calibration", s.calibration}}}};
  if (!s.sweep.empty()) j["sweep"] = sweep;
  return j;
}

Scenario scenario_from_json(const json& j) {
  reject_unknown(j, {"name", "seed", "data", "target", "shadow", "defense", "adaptive", "attacks", "attack", "risk",
                     "sweep"},
                 "scenario");
  Scenario s;
  try {
    read_opt(j, "name", s.name);
    read_opt(j, "seed", s.seed);
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown(d, {"target", "shadow"}, "data");
      if (d.contains("target")) s.target_data = source_from_json(d["target"], "data.target");
      if (d.contains("shadow")) {
        const auto& sh = d["shadow"];
        if (sh.is_string()) {
          if (sh.get<std::string>() != "same") throw ConfigError("data.shadow must be 'same' or a source mapping");
          s.shadow_mode = ShadowData::same;
        } else {
          s.shadow_data = source_from_json(sh, "data.shadow");
          const bool file = s.shadow_data.kind == SourceKind::csv || s.shadow_data.kind == SourceKind::raw_raster;
          s.shadow_mode = file ? ShadowData::file : ShadowData::different;
        }
      }
    }
    if (j.contains("target")) s.target = side_from_json(j["target"], s.target, "target");
    s.shadow = j.contains("shadow") ? side_from_json(j["shadow"], s.target, "shadow") : s.target;
    if (j.contains("defense")) s.defense = defenses::defense_from_json(j["defense"]);
    read_opt(j, "adaptive", s.adaptive);
    if (j.contains("attacks")) {
      const auto& a = j["attacks"];
      if (a.is_string() && a.get<std::string>() == "all") {
        s.attacks = attacks::standard_attacks();
      } else if (a.is_array()) {
        s.attacks.clear();
        for (const auto& name : a) s.attacks.push_back(attacks::parse_attack(name.get<std::string>()));
      } else {
        throw ConfigError("attacks must be 'all' or a list of names");
      }
    }
    if (j.contains("attack")) {
      const auto& a = j["attack"];
      reject_unknown(a, {"epochs", "batch_size", "label_only_budget", "augment_views", "ment_variant"}, "attack");
      for (auto [key, field] : {std::pair{"epochs", &s.attack_epochs}, std::pair{"batch_size", &s.attack_batch_size}}) {
        if (a.contains(key) && !a[key].is_null()) {
          std::size_t v = 0;
          read_opt(a, key, v);
          *field = v;
        }
      }
      read_opt(a, "label_only_budget", s.label_only_budget);
      read_opt(a, "augment_views", s.augment_views);
      std::string mv = ment_variant_name(s.ment_variant);
      read_opt(a, "ment_variant", mv);
      s.ment_variant = parse_ment_variant(mv);
    }
    if (j.contains("risk")) {
      const auto& r = j["risk"];
      reject_unknown(r, {"bins", "calibration"}, "risk");
      read_opt(r, "bins", s.bins);
      read_opt(r, "calibration", s.calibration);
    }
    if (j.contains("sweep")) {
      if (!j["sweep"].is_array()) throw ConfigError("sweep must be a list of defenses");
      for (const auto& d : j["sweep"]) s.sweep.push_back(defenses::defense_from_json(d));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  s.validate();
  return s;
}

json yaml_to_json(const std::string& yaml_text) {
  try {
    return yaml_node_to_json(YAML::Load(yaml_text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
}

Scenario parse_scenario(const std::string& yaml_text) {
  const json j = yaml_to_json(yaml_text);
  if (j.is_null()) throw ConfigError("empty config");
  return scenario_from_json(j);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

const data::Dataset& PreparedData::shadow() const {
  return shadow_storage.size() > 0 ? shadow_storage : target;
}

PreparedData prepare_data(const Scenario& s) {
  PreparedData d;
  auto& seeds = d.seeds;
  seeds.scenario = s.seed;
  seeds.target_data = s.target_data.seed.value_or(mix_seed(s.seed, 1));
  seeds.shadow_data = s.shadow_mode == ShadowData::same ? seeds.target_data
                                                         : s.shadow_data.seed.value_or(mix_seed(s.seed, 2));
  seeds.split = mix_seed(s.seed, 3);
  seeds.target_training = mix_seed(mix_seed(s.seed, 4), s.target.recipe.seed);
  seeds.shadow_training = mix_seed(mix_seed(s.seed, 5), s.shadow.recipe.seed);
  seeds.attacks = mix_seed(s.seed, 6);
  seeds.memguard = mix_seed(s.seed, 7);

  d.target = load_source(s.target_data, seeds.target_data);
  d.target_plan = data::six_way_split(d.target, seeds.split);
  if (s.shadow_mode == ShadowData::same) {
    d.shadow_plan = d.target_plan;
  } else {
    d.shadow_storage = load_source(s.shadow_data, seeds.shadow_data);
    d.shadow_plan = data::six_way_split(d.shadow_storage, mix_seed(seeds.split, 1));
  }
  return d;
}

nn::Posteriors ServedModel::query(const nn::Tensor& x) const {
  auto p = zoo::query(model, x);
  if (!memguard) return p;
  Rng rng(content_seed(memguard_seed, x.data()));
  return defenses::memguard(p, surrogate->net, *memguard, rng).posteriors;
}

attacks::PosteriorOracle ServedModel::oracle() const {
  return [this](const nn::Tensor& x) { return query(x); };
}

namespace {

std::size_t attack_batch(const Scenario& s) { return s.attack_batch_size.value_or(s.shadow.recipe.batch_size); }
std::size_t attack_epochs(const Scenario& s) { return s.attack_epochs.value_or(s.shadow.recipe.epochs); }

const defenses::DefenseConfig& side_defense(const Scenario& s, Side side) {
  static const defenses::DefenseConfig none = defenses::NoDefense{};
  return side == Side::target || s.adaptive ? s.defense : none;
}

}  // namespace

ServedModel serve(const Scenario& s, const PreparedData& d, Side side, zoo::TrainedModel model) {
  ServedModel served;
  served.model = std::move(model);
  const auto* mg = std::get_if<defenses::MemGuard>(&side_defense(s, side));
  if (!mg) return served;

  const bool is_target = side == Side::target;
  const auto& ds = is_target ? d.target : d.shadow();
  const auto& plan = is_target ? d.target_plan : d.shadow_plan;
  const auto& members = plan[is_target ? data::Part::target_train : data::Part::shadow_train];
  const auto& reference = plan[is_target ? data::Part::target_reference : data::Part::shadow_reference];
  if (reference.empty()) throw ConfigError("memguard needs a reference split for its surrogate");
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  for (auto i : members) {
    features.push_back(zoo::query(served.model, ds.samples[i]));
    labels.push_back(1);
  }
  for (auto i : reference) {
    features.push_back(zoo::query(served.model, ds.samples[i]));
    labels.push_back(0);
  }
  zoo::AttackModelSpec spec;
  spec.epochs = attack_epochs(s);
  spec.batch_size = attack_batch(s);
  spec.seed = mix_seed(d.seeds.memguard, is_target ? 1 : 2);
  served.surrogate = zoo::train_attack_model(features, labels, spec);
  served.memguard = *mg;
  served.memguard_seed = mix_seed(d.seeds.memguard, is_target ? 3 : 4);
  return served;
}

ServedModel train_side(const Scenario& s, const PreparedData& d, Side side, const zoo::EpochCallback& on_epoch) {
  const bool is_target = side == Side::target;
  const auto& cfg = is_target ? s.target : s.shadow;
  const auto& ds = is_target ? d.target : d.shadow();
  const auto spec = resolve_spec(cfg.model, ds, is_target ? "target" : "shadow");
  auto recipe = cfg.recipe;
  recipe.seed = is_target ? d.seeds.target_training : d.seeds.shadow_training;
  const auto view = is_target ? zoo::target_view(ds, d.target_plan) : zoo::shadow_view(ds, d.shadow_plan);
  auto model = zoo::train_target(spec, view, recipe, side_defense(s, side), cfg.augmentation, on_epoch);
  return serve(s, d, side, std::move(model));
}

attacks::AttackOptions attack_options(const Scenario& s, const PreparedData& d) {
  attacks::AttackOptions o;
  o.attack_epochs = attack_epochs(s);
  o.attack_batch_size = attack_batch(s);
  o.label_only_budget = s.label_only_budget;
  o.augment_views = s.augment_views;
  o.ment_variant = s.ment_variant;
  o.seed = d.seeds.attacks;
  // The attacker only knows its own data.
  if (!d.shadow().is_raster()) o.feature_std = data::feature_std(d.shadow());
  return o;
}

namespace {

std::vector<int> predictions(const zoo::TrainedModel& m, const data::Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(nn::argmax(zoo::query(m, ds.samples[i])));
  return out;
}

void skip_attacks(ExperimentReport& report, const Scenario& s, const std::string& stage, const std::string& why) {
  for (auto a : s.attacks) {
    AttackResult r;
    r.attack = attacks::attack_name(a);
    r.stage = stage;
    r.error = "skipped: " + why;
    report.attacks.push_back(std::move(r));
  }
}

}  // namespace

ExperimentReport run_scenario(const Scenario& s, const VerdictSink& sink) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.name = s.name;
  report.bins = s.bins;
  report.calibration_name = s.calibration;
  auto finish = [&]() {
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
  };
  auto fail = [&](const std::string& stage, const std::exception& e) {
    report.errors.push_back({stage, e.what()});
  };

  try {
    report.scenario = scenario_to_json(s);
    s.validate();
    report.calibration = risk::calibration_preset(s.calibration);
  } catch (const std::exception& e) {
    fail("config", e);
    skip_attacks(report, s, "config", "invalid scenario");
    return finish();
  }

  PreparedData d;
  try {
    d = prepare_data(s);
    report.seeds = d.seeds;
  } catch (const std::exception& e) {
    fail("data", e);
    skip_attacks(report, s, "data", "no data");
    return finish();
  }

  using data::Part;
  const auto& members = d.target_plan[Part::target_train];
  const auto& nonmembers = d.target_plan[Part::target_test];
  report.eval_members = members.size();
  report.eval_nonmembers = nonmembers.size();

  std::optional<ServedModel> target;
  try {
    target = train_side(s, d, Side::target);
    report.target_defense = target->model.defense_tag();
    report.target_train_accuracy = zoo::accuracy(target->model, d.target, members);
    report.target_test_accuracy = zoo::accuracy(target->model, d.target, nonmembers);
    report.scenario["target"]["model"] = target->model.spec;
  } catch (const std::exception& e) {
    fail("train_target", e);
    skip_attacks(report, s, "train_target", "target model unavailable");
    return finish();
  }

  const attacks::SampleSet eval_members{d.target, members};
  const attacks::SampleSet eval_nonmembers{d.target, nonmembers};
  const auto target_oracle = target->oracle();

  try {
    report.overfitting = risk::overfitting_level(report.target_train_accuracy, report.target_test_accuracy);
    const auto tl = d.target.labels_of(members);
    const auto vl = d.target.labels_of(nonmembers);
    report.overfitting_per_class =
        risk::overfitting_per_class(tl, predictions(target->model, d.target, members), vl,
                                    predictions(target->model, d.target, nonmembers), d.target.num_classes);
    const auto ent = risk::score_distributions(target_oracle, eval_members, eval_nonmembers,
                                               risk::ScoreMetric::entropy, s.bins);
    const auto ce = risk::score_distributions(target_oracle, eval_members, eval_nonmembers,
                                              risk::ScoreMetric::cross_entropy, s.bins);
    report.js_entropy = risk::js_distance(ent.members, ent.nonmembers);
    report.js_cross_entropy = risk::js_distance(ce.members, ce.nonmembers);
    report.estimated_risk = risk::estimate_risk(report.js_entropy, report.calibration);
  } catch (const std::exception& e) {
    fail("riskmeter", e);
  }

  std::optional<ServedModel> shadow;
  try {
    shadow = train_side(s, d, Side::shadow);
    report.shadow_defense = shadow->model.defense_tag();
    report.shadow_train_accuracy = zoo::accuracy(shadow->model, d.shadow(), d.shadow_plan[Part::shadow_train]);
    report.shadow_test_accuracy = zoo::accuracy(shadow->model, d.shadow(), d.shadow_plan[Part::shadow_test]);
    report.scenario["shadow"]["model"] = shadow->model.spec;
  } catch (const std::exception& e) {
    fail("train_shadow", e);
    skip_attacks(report, s, "train_shadow", "shadow model unavailable");
    return finish();
  }

  const auto options = attack_options(s, d);
  const auto shadow_oracle = shadow->oracle();
  const attacks::SampleSet shadow_members{d.shadow(), d.shadow_plan[Part::shadow_train]};
  const attacks::SampleSet shadow_nonmembers{d.shadow(), d.shadow_plan[Part::shadow_test]};

  for (auto kind : s.attacks) {
    AttackResult result;
    result.attack = attacks::attack_name(kind);
    std::string stage = "prepare";
    try {
      const auto prepared =
          attacks::prepare_attack(kind, shadow_oracle, shadow_members, shadow_nonmembers, d.shadow().num_classes, options);
      result.attack_training_accuracy = prepared.training_accuracy;
      stage = "attack";
      const auto verdicts = attacks::run_attack(prepared, target_oracle, eval_members, eval_nonmembers, options);
      result.flagged = static_cast<std::size_t>(
          std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.flagged; }));
      result.metrics = metrics::evaluate(verdicts);
      if (sink) sink(result.attack, verdicts);
    } catch (const std::exception& e) {
      result.stage = stage;
      result.error = e.what();
      report.errors.push_back({stage + ":" + result.attack, e.what()});
    }
    report.attacks.push_back(std::move(result));
  }

  for (const auto& a : report.attacks) {
    if (a.metrics && (!report.best_attack || a.metrics->accuracy > report.best_accuracy)) {
      report.best_attack = a.attack;
      report.best_accuracy = a.metrics->accuracy;
    }
  }
  return finish();
}

std::vector<EpochPoint> epoch_sweep(const Scenario& s, std::size_t every, attacks::AttackKind attack) {
  if (every == 0) throw InvalidInput("snapshot interval must be positive");
  s.validate();
  const auto d = prepare_data(s);
  std::vector<zoo::TrainedModel> target_snaps, shadow_snaps;
  auto snapshot = [every](std::vector<zoo::TrainedModel>& out) {
    return [&out, every](std::size_t epoch, const zoo::TrainedModel& m) {
      if (epoch % every == 0) out.push_back(m);
    };
  };
  train_side(s, d, Side::target, snapshot(target_snaps));
  train_side(s, d, Side::shadow, snapshot(shadow_snaps));

  using data::Part;
  const auto& members = d.target_plan[Part::target_train];
  const auto& nonmembers = d.target_plan[Part::target_test];
  const attacks::SampleSet eval_members{d.target, members};
  const attacks::SampleSet eval_nonmembers{d.target, nonmembers};
  const attacks::SampleSet shadow_members{d.shadow(), d.shadow_plan[Part::shadow_train]};
  const attacks::SampleSet shadow_nonmembers{d.shadow(), d.shadow_plan[Part::shadow_test]};
  const auto options = attack_options(s, d);

  std::vector<EpochPoint> out;
  for (std::size_t i = 0; i < target_snaps.size() && i < shadow_snaps.size(); ++i) {
    const auto target = serve(s, d, Side::target, target_snaps[i]);
    const auto shadow = serve(s, d, Side::shadow, shadow_snaps[i]);
    EpochPoint p;
    p.epoch = (i + 1) * every;
    p.train_accuracy = zoo::accuracy(target.model, d.target, members);
    p.test_accuracy = zoo::accuracy(target.model, d.target, nonmembers);
    p.overfitting = risk::overfitting_level(p.train_accuracy, p.test_accuracy);
    const auto oracle = target.oracle();
    const auto ent = risk::score_distributions(oracle, eval_members, eval_nonmembers, risk::ScoreMetric::entropy, s.bins);
    const auto ce =
        risk::score_distributions(oracle, eval_members, eval_nonmembers, risk::ScoreMetric::cross_entropy, s.bins);
    p.js_entropy = risk::js_distance(ent.members, ent.nonmembers);
    p.js_cross_entropy = risk::js_distance(ce.members, ce.nonmembers);
    const auto prepared = attacks::prepare_attack(attack, shadow.oracle(), shadow_members, shadow_nonmembers,
                                                  d.shadow().num_classes, options);
    p.attack_accuracy = metrics::accuracy(attacks::run_attack(prepared, oracle, eval_members, eval_nonmembers, options));
    out.push_back(p);
  }
  return out;
}

std::vector<Scenario> expand_sweep(const Scenario& s) {
  if (s.sweep.empty()) return {s};
  std::vector<Scenario> out;
  for (std::size_t i = 0; i < s.sweep.size(); ++i) {
    Scenario c = s;
    c.sweep.clear();
    c.defense = s.sweep[i];
    c.name = s.name + "[" + std::to_string(i) + "]";
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ExperimentReport> run_scenarios(const std::vector<Scenario>& scenarios, std::size_t threads) {
  std::vector<ExperimentReport> out(scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) out[i] = run_scenario(scenarios[i]);
  };
  const std::size_t n = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(scenarios.size(), 1));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  return out;
}

}  // namespace membench::harness
