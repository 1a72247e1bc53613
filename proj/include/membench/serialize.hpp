#pragma once

// nlohmann::json conversions for the configuration and metadata types. The
// scenario config (YAML) is converted to JSON and decoded through these same
// functions, so there is one schema.

#include <json.hpp>

#include "membench/augment.hpp"
#include "membench/defenses.hpp"
#include "membench/modelzoo.hpp"
#include "membench/optim.hpp"

namespace membench::nn {
void to_json(nlohmann::json& j, const TrainRecipe& r);
void from_json(const nlohmann::json& j, TrainRecipe& r);
}  // namespace membench::nn

namespace membench::data {
void to_json(nlohmann::json& j, const AugMode& m);
void from_json(const nlohmann::json& j, AugMode& m);
}  // namespace membench::data

namespace membench::defenses {
nlohmann::json defense_to_json(const DefenseConfig& c);
DefenseConfig defense_from_json(const nlohmann::json& j);
}  // namespace membench::defenses

namespace membench::zoo {
void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);
void to_json(nlohmann::json& j, const EpochStats& s);
void from_json(const nlohmann::json& j, EpochStats& s);
}  // namespace membench::zoo
