#include "membench/serialize.hpp"

#include "membench/error.hpp"

using nlohmann::json;

namespace membench {
namespace {

// Reads an optional key, keeping the default when absent. Type errors become
// ConfigError naming the key.
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

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a mapping");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

}  // namespace

namespace nn {

void to_json(json& j, const TrainRecipe& r) {
  j = json{{"epochs", r.epochs},     {"batch_size", r.batch_size},     {"lr0", r.lr0},
           {"momentum", r.momentum}, {"weight_decay", r.weight_decay}, {"seed", r.seed}};
}

void from_json(const json& j, TrainRecipe& r) {
  reject_unknown(j, {"epochs", "batch_size", "lr0", "momentum", "weight_decay", "seed"}, "recipe");
  read_opt(j, "epochs", r.epochs);
  read_opt(j, "batch_size", r.batch_size);
  read_opt(j, "lr0", r.lr0);
  read_opt(j, "momentum", r.momentum);
  read_opt(j, "weight_decay", r.weight_decay);
  read_opt(j, "seed", r.seed);
  r.validate();
}

}  // namespace nn

namespace data {

void to_json(json& j, const AugMode& m) {
  j = json{{"kind", aug_kind_name(m.kind)}};
  if (m.kind == AugKind::randaug) {
    j["n"] = m.n;
    j["m"] = m.m;
  }
}

void from_json(const json& j, AugMode& m) {
  if (j.is_string()) {
    m = AugMode{};
    m.kind = parse_aug_kind(j.get<std::string>());
    return;
  }
  reject_unknown(j, {"kind", "n", "m"}, "augmentation");
  std::string kind = "none";
  read_opt(j, "kind", kind);
  m.kind = parse_aug_kind(kind);
  read_opt(j, "n", m.n);
  read_opt(j, "m", m.m);
  m.validate();
}

}  // namespace data

namespace defenses {

json defense_to_json(const DefenseConfig& c) {
  json j{{"kind", defense_name(c)}};
  if (auto* ls = std::get_if<LabelSmoothing>(&c)) j["epsilon"] = ls->epsilon;
  if (auto* ar = std::get_if<AdvReg>(&c)) j["lambda"] = ar->lambda;
  if (auto* mg = std::get_if<MemGuard>(&c)) {
    j["p_apply"] = mg->p_apply;
    j["max_steps"] = mg->max_steps;
    j["step_size"] = mg->step_size;
    j["max_l1"] = mg->max_l1;
  }
  if (auto* mm = std::get_if<MixupMmd>(&c)) {
    j["lambda"] = mm->lambda;
    j["alpha"] = mm->alpha;
    j["bandwidth"] = mm->bandwidth;
  }
  if (auto* dp = std::get_if<DpSgd>(&c)) {
    j["sigma"] = dp->sigma;
    j["clip"] = dp->clip;
  }
  if (auto* da = std::get_if<DataAug>(&c)) j["mode"] = da->mode;
  return j;
}

DefenseConfig defense_from_json(const json& j) {
  if (j.is_string()) return defense_from_json(json{{"kind", j}});
  if (!j.is_object()) throw ConfigError("defense must be a mapping or a name");
  std::string kind = "none";
  read_opt(j, "kind", kind);
  DefenseConfig out;
  if (kind == "none") {
    reject_unknown(j, {"kind"}, "defense none");
    out = NoDefense{};
  } else if (kind == "label_smoothing") {
    reject_unknown(j, {"kind", "epsilon"}, "defense label_smoothing");
    LabelSmoothing c;
    read_opt(j, "epsilon", c.epsilon);
    out = c;
  } else if (kind == "advreg") {
    reject_unknown(j, {"kind", "lambda"}, "defense advreg");
    AdvReg c;
    read_opt(j, "lambda", c.lambda);
    out = c;
  } else if (kind == "memguard") {
    reject_unknown(j, {"kind", "p_apply", "max_steps", "step_size", "max_l1"}, "defense memguard");
    MemGuard c;
    read_opt(j, "p_apply", c.p_apply);
    read_opt(j, "max_steps", c.max_steps);
    read_opt(j, "step_size", c.step_size);
    read_opt(j, "max_l1", c.max_l1);
    out = c;
  } else if (kind == "mixupmmd") {
    reject_unknown(j, {"kind", "lambda", "alpha", "bandwidth"}, "defense mixupmmd");
    MixupMmd c;
    read_opt(j, "lambda", c.lambda);
    read_opt(j, "alpha", c.alpha);
    read_opt(j, "bandwidth", c.bandwidth);
    out = c;
  } else if (kind == "dpsgd") {
    reject_unknown(j, {"kind", "sigma", "clip"}, "defense dpsgd");
    DpSgd c;
    read_opt(j, "sigma", c.sigma);
    read_opt(j, "clip", c.clip);
    out = c;
  } else if (kind == "data_aug") {
    reject_unknown(j, {"kind", "mode"}, "defense data_aug");
    DataAug c;
    read_opt(j, "mode", c.mode);
    out = c;
  } else {
    throw ConfigError("unknown defense '" + kind + "'");
  }
  validate(out);
  return out;
}

}  // namespace defenses

namespace zoo {

void to_json(json& j, const ModelSpec& s) {
  j = json{{"kind", model_kind_name(s.kind)},
           {"widths", s.widths},
           {"num_classes", s.num_classes},
           {"input_shape", s.input_shape}};
}

void from_json(const json& j, ModelSpec& s) {
  reject_unknown(j, {"kind", "widths", "num_classes", "input_shape"}, "model");
  std::string kind = model_kind_name(s.kind);
  read_opt(j, "kind", kind);
  s.kind = parse_model_kind(kind);
  read_opt(j, "widths", s.widths);
  read_opt(j, "num_classes", s.num_classes);
  read_opt(j, "input_shape", s.input_shape);
}

void to_json(json& j, const EpochStats& s) {
  j = json{{"epoch", s.epoch},
           {"loss", s.loss},
           {"train_accuracy", s.train_accuracy},
           {"test_accuracy", s.test_accuracy}};
}

void from_json(const json& j, EpochStats& s) {
  s.epoch = j.at("epoch").get<std::size_t>();
  s.loss = j.at("loss").get<double>();
  s.train_accuracy = j.at("train_accuracy").get<double>();
  s.test_accuracy = j.at("test_accuracy").get<double>();
}

}  // namespace zoo
}  // namespace membench
