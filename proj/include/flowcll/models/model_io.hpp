#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "flowcll/models/forest.hpp"
#include "flowcll/models/gbt.hpp"

namespace flowcll::models {

inline constexpr int kModelSchemaVersion = 1;

using Model = std::variant<GbtModel, ForestModel>;
using ModelSpec = std::variant<GbtParams, ForestParams>;

std::string_view model_kind(const Model& model);
std::size_t model_n_features(const Model& model);
double predict_proba(const Model& model, std::span<const float> x);

Model train_model(const ModelSpec& spec, const TrainingSet& train, std::uint64_t seed);

nlohmann::json to_json(const GbtParams& p);
nlohmann::json to_json(const ForestParams& p);
GbtParams gbt_params_from_json(const nlohmann::json& j);
ForestParams forest_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& spec);

/// Document layout:
///   {schema_version, model_type: "gbt"|"rf", params, n_features, seed,
///    trees: [{nodes: [{f, t, l, r} | {leaf}]}]}
nlohmann::json to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

std::string serialize_model(const Model& model);
Model deserialize_model(std::string_view text);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

} // namespace flowcll::models
