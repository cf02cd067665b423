#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowcll::models {

enum class ModelErrc {
  EmptyCohort,
  SingleClassCohort,
  RaggedMatrix,
  NonFiniteFeature,
  InvalidParams,
  DimensionMismatch,
  EmptyNode,
  SchemaVersionMismatch,
  MalformedModel,
};

std::string_view to_string(ModelErrc code);

class ModelError : public std::runtime_error {
 public:
  ModelError(ModelErrc code, const std::string& what);
  ModelErrc code() const noexcept { return code_; }

 private:
  ModelErrc code_;
};

} // namespace flowcll::models
