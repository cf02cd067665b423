#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowcll/models/training_set.hpp"
#include "flowcll/models/tree.hpp"

namespace flowcll::models {

/// Random forest with Gini splits. Each tree sees a bootstrap resample and
/// draws a fresh feature subset at every node.
struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 2;
  /// Features drawn per node; 0 means floor(sqrt(n_features)).
  std::size_t max_features = 0;
  bool bootstrap = true;

  void validate() const;
  std::size_t features_per_node(std::size_t n_features) const;
};

struct ForestModel {
  ForestParams params;
  std::vector<Tree> trees;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
};

/// 1 - sum_k p_k^2 over the two classes. Throws EmptyNode for (0, 0).
double gini_impurity(double negatives, double positives);

ForestModel rf_train(const TrainingSet& train, const ForestParams& params,
                     std::uint64_t seed);

/// Mean over trees of the leaf class-1 fraction.
double rf_predict_proba(const ForestModel& model, std::span<const float> x);

} // namespace flowcll::models
