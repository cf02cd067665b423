#include <algorithm>

#include "flowcll/models/split_search.hpp"

namespace flowcll::models {

SortedColumns SortedColumns::build(const TrainingSet& set) {
  SortedColumns cols;
  cols.n_rows_ = set.size();
  cols.n_features_ = set.n_features;
  cols.entries_.resize(cols.n_rows_ * cols.n_features_);

  const std::size_t n = cols.n_rows_;
  const auto d = static_cast<std::ptrdiff_t>(cols.n_features_);
  constexpr std::ptrdiff_t kBlock = 256;

  // Gather a block of features from every row, then sort each column.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f0 = 0; f0 < d; f0 += kBlock) {
    const std::ptrdiff_t f1 = std::min(f0 + kBlock, d);
    for (std::size_t r = 0; r < n; ++r) {
      const float* src = set.rows[r].data();
      for (std::ptrdiff_t f = f0; f < f1; ++f) {
        cols.entries_[static_cast<std::size_t>(f) * n + r] = {src[f],
                                                               static_cast<std::uint32_t>(r)};
      }
    }
    for (std::ptrdiff_t f = f0; f < f1; ++f) {
      auto* b = cols.entries_.data() + static_cast<std::size_t>(f) * n;
      std::sort(b, b + n, [](const ColumnEntry& a, const ColumnEntry& c) {
        return a.value < c.value || (a.value == c.value && a.row < c.row);
      });
    }
  }
  return cols;
}

} // namespace flowcll::models
