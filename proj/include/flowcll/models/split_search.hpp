#pragma once

// Exact greedy split search for second-order boosting.
//
// Columns are presorted once per training run. A search pass serves one
// tree level: every row carries the slot of the open node it sits in (or
// -1), and each feature column is scanned once, accumulating left-child
// gradient sums per slot. Candidate thresholds sit midway between adjacent
// distinct values of a node's rows.
//
// Gradient sums accumulate in fixed point (kFixedScale units) so a sum over
// a given set of rows is exact and independent of visiting order. Combined
// with the total order in better_split, the chosen split is identical for
// any thread count and matches the serial reference bit for bit.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "flowcll/models/training_set.hpp"

namespace flowcll::models {

inline constexpr double kFixedScale = 1099511627776.0;  // 2^40

inline std::int64_t to_fixed(double v) {
  return static_cast<std::int64_t>(std::llround(v * kFixedScale));
}

inline double from_fixed(std::int64_t q) { return static_cast<double>(q) / kFixedScale; }

/// Splits whose gain does not exceed this are not taken.
inline constexpr double kMinSplitGain = 1e-10;

struct ColumnEntry {
  float value;
  std::uint32_t row;
};

/// Feature-major presorted columns: for each feature, (value, row) pairs in
/// ascending value order, ties by row.
class SortedColumns {
 public:
  static SortedColumns build(const TrainingSet& set);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_features() const { return n_features_; }
  std::span<const ColumnEntry> column(std::size_t f) const {
    return {entries_.data() + f * n_rows_, n_rows_};
  }

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_features_ = 0;
  std::vector<ColumnEntry> entries_;
};

struct GradientSums {
  std::int64_t grad = 0;
  std::int64_t hess = 0;
};

struct SplitQuery {
  std::span<const std::int64_t> grad;   // per row, fixed point
  std::span<const std::int64_t> hess;   // per row, fixed point
  std::span<const std::int32_t> row_slot;
  std::span<const GradientSums> slot_totals;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
};

struct SplitCandidate {
  double gain = -std::numeric_limits<double>::infinity();
  std::int32_t feature = -1;
  double threshold = 0.0;

  bool found() const { return feature >= 0; }
};

/// Strict total order: higher gain, then lower feature, then lower threshold.
inline bool better_split(const SplitCandidate& a, const SplitCandidate& b) {
  if (!a.found()) return false;
  if (!b.found()) return true;
  if (a.gain != b.gain) return a.gain > b.gain;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.threshold < b.threshold;
}

/// Regularized gain of splitting (G, H) into (GL, HL) and the remainder.
inline double split_gain(double gl, double hl, double g, double h, double lambda,
                         double gamma) {
  const double gr = g - gl;
  const double hr = h - hl;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                g * g / (h + lambda)) -
         gamma;
}

/// Best split per slot, OpenMP-parallel over features.
std::vector<SplitCandidate> find_best_splits(const SortedColumns& columns,
                                             const SplitQuery& query);

/// Single-threaded reference with the same contract.
std::vector<SplitCandidate> find_best_splits_serial(const SortedColumns& columns,
                                                    const SplitQuery& query);

} // namespace flowcll::models
