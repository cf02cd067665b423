#include <algorithm>
#include <cmath>

#include "flowcll/models/error.hpp"
#include "flowcll/models/training_set.hpp"
#include "flowcll/models/tree.hpp"

namespace flowcll::models {

std::string_view to_string(ModelErrc code) {
  switch (code) {
    case ModelErrc::EmptyCohort: return "EmptyCohort";
    case ModelErrc::SingleClassCohort: return "SingleClassCohort";
    case ModelErrc::RaggedMatrix: return "RaggedMatrix";
    case ModelErrc::NonFiniteFeature: return "NonFiniteFeature";
    case ModelErrc::InvalidParams: return "InvalidParams";
    case ModelErrc::DimensionMismatch: return "DimensionMismatch";
    case ModelErrc::EmptyNode: return "EmptyNode";
    case ModelErrc::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ModelErrc::MalformedModel: return "MalformedModel";
  }
  return "Unknown";
}

ModelError::ModelError(ModelErrc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    deepest = std::max(deepest, d[i]);
    if (n.is_leaf()) continue;
    d[static_cast<std::size_t>(n.left)] = d[i] + 1;
    d[static_cast<std::size_t>(n.right)] = d[i] + 1;
  }
  return deepest;
}

void TrainingSet::validate() const {
  if (rows.size() < 2) {
    throw ModelError(ModelErrc::EmptyCohort,
                     "training needs at least 2 cases, got " + std::to_string(rows.size()));
  }
  if (labels.size() != rows.size()) {
    throw ModelError(ModelErrc::RaggedMatrix, "label count differs from row count");
  }
  if (n_features == 0) throw ModelError(ModelErrc::RaggedMatrix, "rows have no features");
  std::size_t positives = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != n_features) {
      throw ModelError(ModelErrc::RaggedMatrix,
                       "row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                           " features, expected " + std::to_string(n_features));
    }
    if (labels[i] != 0 && labels[i] != 1) {
      throw ModelError(ModelErrc::InvalidParams, "labels must be 0 or 1");
    }
    positives += static_cast<std::size_t>(labels[i]);
  }
  if (positives == 0 || positives == rows.size()) {
    throw ModelError(ModelErrc::SingleClassCohort,
                     "training set has only " +
                         std::string(positives == 0 ? "negative" : "positive") + " cases");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = std::find_if(rows[i].begin(), rows[i].end(),
                           [](float v) { return !std::isfinite(v); });
    if (it != rows[i].end()) {
      throw ModelError(ModelErrc::NonFiniteFeature,
                       "row " + std::to_string(i) + ", feature " +
                           std::to_string(it - rows[i].begin()));
    }
  }
}

TrainingSet make_training_set(const featurize::CohortMatrix& cohort,
                              std::span<const std::string> ids) {
  TrainingSet set;
  set.n_features = cohort.n_features;
  auto add = [&](const featurize::CaseVector& c) {
    set.rows.emplace_back(c.features);
    set.labels.push_back(c.binary_label);
  };
  if (ids.empty()) {
    for (const auto& c : cohort.cases) add(c);
    return set;
  }
  for (const auto& id : ids) {
    auto idx = cohort.index_of(id);
    if (!idx) throw ModelError(ModelErrc::RaggedMatrix, "case '" + id + "' not in cohort");
    add(cohort.cases[*idx]);
  }
  return set;
}

} // namespace flowcll::models
