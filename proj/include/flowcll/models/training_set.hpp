#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flowcll/featurize.hpp"

namespace flowcll::models {

/// Non-owning view of labeled feature rows. The referenced storage must
/// outlive the set.
struct TrainingSet {
  std::vector<std::span<const float>> rows;
  std::vector<int> labels;
  std::size_t n_features = 0;

  std::size_t size() const { return rows.size(); }

  /// Throws EmptyCohort, SingleClassCohort, RaggedMatrix or
  /// NonFiniteFeature.
  void validate() const;
};

/// Rows of `cohort` for the given ids, in the order given. An empty id list
/// selects the whole cohort.
TrainingSet make_training_set(const featurize::CohortMatrix& cohort,
                              std::span<const std::string> ids = {});

} // namespace flowcll::models
