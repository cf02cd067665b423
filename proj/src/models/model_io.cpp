#include <algorithm>
#include <fstream>
#include <sstream>

#include "flowcll/models/error.hpp"
#include "flowcll/models/model_io.hpp"

namespace flowcll::models {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw ModelError(ModelErrc::MalformedModel, what);
}

json trees_to_json(const std::vector<Tree>& trees) {
  json out = json::array();
  for (const auto& t : trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"leaf", n.value}});
      } else {
        nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
      }
    }
    out.push_back({{"nodes", std::move(nodes)}});
  }
  return out;
}

std::vector<Tree> trees_from_json(const json& j, std::size_t n_features,
                                  std::size_t max_depth) {
  if (!j.is_array()) malformed("'trees' must be an array");
  std::vector<Tree> trees;
  trees.reserve(j.size());
  for (std::size_t ti = 0; ti < j.size(); ++ti) {
    const auto where = "tree " + std::to_string(ti);
    const auto& nodes = j[ti].at("nodes");
    if (!nodes.is_array() || nodes.empty()) malformed(where + ": no nodes");
    Tree t;
    t.nodes.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& nj = nodes[i];
      auto& n = t.nodes[i];
      if (nj.contains("leaf")) {
        n.value = nj.at("leaf").get<double>();
        continue;
      }
      const auto f = nj.at("f").get<std::int64_t>();
      const auto l = nj.at("l").get<std::int64_t>();
      const auto r = nj.at("r").get<std::int64_t>();
      if (f < 0 || static_cast<std::size_t>(f) >= n_features) {
        throw ModelError(ModelErrc::MalformedModel,
                         where + ": feature index " + std::to_string(f) +
                             " outside n_features=" + std::to_string(n_features));
      }
      const auto size = static_cast<std::int64_t>(nodes.size());
      // Children after their parent rules out cycles.
      if (l <= static_cast<std::int64_t>(i) || r <= static_cast<std::int64_t>(i) ||
          l >= size || r >= size || l == r) {
        malformed(where + ": bad child indices at node " + std::to_string(i));
      }
      n.feature = static_cast<std::int32_t>(f);
      n.threshold = nj.at("t").get<double>();
      n.left = static_cast<std::int32_t>(l);
      n.right = static_cast<std::int32_t>(r);
    }
    std::vector<int> parents(t.nodes.size(), 0);
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) continue;
      ++parents[static_cast<std::size_t>(n.left)];
      ++parents[static_cast<std::size_t>(n.right)];
    }
    for (std::size_t i = 1; i < parents.size(); ++i) {
      if (parents[i] != 1) malformed(where + ": node " + std::to_string(i) + " is not a tree node");
    }
    if (t.depth() > max_depth) {
      malformed(where + ": depth " + std::to_string(t.depth()) + " exceeds max_depth");
    }
    trees.push_back(std::move(t));
  }
  return trees;
}

} // namespace

std::string_view model_kind(const Model& model) {
  return std::holds_alternative<GbtModel>(model) ? "gbt" : "rf";
}

std::size_t model_n_features(const Model& model) {
  return std::visit([](const auto& m) { return m.n_features; }, model);
}

double predict_proba(const Model& model, std::span<const float> x) {
  if (const auto* g = std::get_if<GbtModel>(&model)) return gbt_predict_proba(*g, x);
  return rf_predict_proba(std::get<ForestModel>(model), x);
}

Model train_model(const ModelSpec& spec, const TrainingSet& train, std::uint64_t seed) {
  if (const auto* g = std::get_if<GbtParams>(&spec)) return gbt_train(train, *g, seed);
  return rf_train(train, std::get<ForestParams>(spec), seed);
}

json to_json(const GbtParams& p) {
  return {{"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"learning_rate", p.learning_rate},
          {"l2_lambda", p.l2_lambda},
          {"gamma", p.gamma},
          {"min_child_weight", p.min_child_weight},
          {"base_score", p.base_score}};
}

json to_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"criterion", "gini"},
          {"max_features", p.max_features},
          {"bootstrap", p.bootstrap}};
}

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw ModelError(ModelErrc::InvalidParams, "params must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ModelError(ModelErrc::InvalidParams, "unknown parameter '" + key + "'");
    }
  }
}

} // namespace

GbtParams gbt_params_from_json(const json& j) {
  reject_unknown_keys(j, {"n_trees", "max_depth", "learning_rate", "l2_lambda", "gamma",
                          "min_child_weight", "base_score"});
  GbtParams p;
  try {
    p.n_trees = j.value("n_trees", p.n_trees);
    p.max_depth = j.value("max_depth", p.max_depth);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.l2_lambda = j.value("l2_lambda", p.l2_lambda);
    p.gamma = j.value("gamma", p.gamma);
    p.min_child_weight = j.value("min_child_weight", p.min_child_weight);
    p.base_score = j.value("base_score", p.base_score);
  } catch (const json::exception& e) {
    throw ModelError(ModelErrc::InvalidParams, e.what());
  }
  p.validate();
  return p;
}

ForestParams forest_params_from_json(const json& j) {
  reject_unknown_keys(j, {"n_trees", "max_depth", "max_features", "bootstrap", "criterion"});
  ForestParams p;
  try {
    p.n_trees = j.value("n_trees", p.n_trees);
    p.max_depth = j.value("max_depth", p.max_depth);
    p.max_features = j.value("max_features", p.max_features);
    p.bootstrap = j.value("bootstrap", p.bootstrap);
    if (j.value("criterion", std::string("gini")) != "gini") {
      throw ModelError(ModelErrc::InvalidParams, "only the gini criterion is supported");
    }
  } catch (const json::exception& e) {
    throw ModelError(ModelErrc::InvalidParams, e.what());
  }
  p.validate();
  return p;
}

json to_json(const ModelSpec& spec) {
  return std::visit([](const auto& p) { return to_json(p); }, spec);
}

json to_json(const Model& model) {
  return std::visit(
      [&](const auto& m) {
        json j = {{"schema_version", kModelSchemaVersion},
                  {"model_type", model_kind(model)},
                  {"params", to_json(m.params)},
                  {"n_features", m.n_features},
                  {"seed", m.seed},
                  {"trees", trees_to_json(m.trees)}};
        if (std::holds_alternative<GbtModel>(model)) {
          j["leaf_values"] = "unscaled: margin = logit(base_score) + learning_rate * sum(leaf)";
        } else {
          j["leaf_values"] = "class-1 fraction; probability = mean over trees";
        }
        return j;
      },
      model);
}

Model model_from_json(const json& j) {
  try {
    const auto version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw ModelError(ModelErrc::SchemaVersionMismatch,
                       "schema_version " + std::to_string(version) + ", expected " +
                           std::to_string(kModelSchemaVersion));
    }
    const auto type = j.at("model_type").get<std::string>();
    const auto n_features = j.at("n_features").get<std::size_t>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    if (type == "gbt") {
      GbtModel m;
      m.params = gbt_params_from_json(j.at("params"));
      m.n_features = n_features;
      m.seed = seed;
      m.trees = trees_from_json(j.at("trees"), n_features, m.params.max_depth);
      if (m.trees.size() > m.params.n_trees) malformed("more trees than n_trees");
      return m;
    }
    if (type == "rf") {
      ForestModel m;
      m.params = forest_params_from_json(j.at("params"));
      m.n_features = n_features;
      m.seed = seed;
      m.trees = trees_from_json(j.at("trees"), n_features, m.params.max_depth);
      if (m.trees.size() > m.params.n_trees) malformed("more trees than n_trees");
      return m;
    }
    malformed("unknown model_type '" + type + "'");
  } catch (const json::exception& e) {
    malformed(e.what());
  }
}

std::string serialize_model(const Model& model) { return to_json(model).dump(); }

Model deserialize_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  return model_from_json(j);
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) malformed("cannot write " + path.string());
  out << to_json(model).dump(1) << '\n';
  if (!out) malformed("write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) malformed("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

} // namespace flowcll::models
