#include <omp.h>

#include "flowcll/models/split_search.hpp"
#include "flowcll/models/tree.hpp"

namespace flowcll::models {

namespace {

struct ScanState {
  std::int64_t grad = 0;
  std::int64_t hess = 0;
  float last = 0.0f;
  bool seen = false;
};

// Scans one column and folds its per-slot best into `best`.
void scan_column(std::span<const ColumnEntry> column, std::int32_t feature,
                 const SplitQuery& q, std::vector<ScanState>& state,
                 std::vector<SplitCandidate>& best) {
  const std::size_t n_slots = q.slot_totals.size();
  for (std::size_t s = 0; s < n_slots; ++s) state[s] = ScanState{};

  for (const auto& e : column) {
    const auto slot = q.row_slot[e.row];
    if (slot < 0) continue;
    auto& st = state[static_cast<std::size_t>(slot)];
    if (st.seen && e.value != st.last) {
      const auto& tot = q.slot_totals[static_cast<std::size_t>(slot)];
      const double hl = from_fixed(st.hess);
      const double hr = from_fixed(tot.hess - st.hess);
      if (hl >= q.min_child_weight && hr >= q.min_child_weight) {
        const double gain = split_gain(from_fixed(st.grad), hl, from_fixed(tot.grad),
                                       from_fixed(tot.hess), q.lambda, q.gamma);
        auto& b = best[static_cast<std::size_t>(slot)];
        const SplitCandidate cand{gain, feature, split_threshold(st.last, e.value)};
        if (better_split(cand, b)) b = cand;
      }
    }
    st.grad += q.grad[e.row];
    st.hess += q.hess[e.row];
    st.last = e.value;
    st.seen = true;
  }
}

} // namespace

std::vector<SplitCandidate> find_best_splits(const SortedColumns& columns,
                                             const SplitQuery& query) {
  const std::size_t n_slots = query.slot_totals.size();
  std::vector<SplitCandidate> best(n_slots);
  const auto d = static_cast<std::ptrdiff_t>(columns.n_features());

#pragma omp parallel
  {
    std::vector<SplitCandidate> local(n_slots);
    std::vector<ScanState> state(n_slots);
#pragma omp for schedule(dynamic, 512) nowait
    for (std::ptrdiff_t f = 0; f < d; ++f) {
      scan_column(columns.column(static_cast<std::size_t>(f)),
                  static_cast<std::int32_t>(f), query, state, local);
    }
    // better_split is a total order, so merge order cannot matter.
#pragma omp critical(flowcll_split_merge)
    for (std::size_t s = 0; s < n_slots; ++s) {
      if (better_split(local[s], best[s])) best[s] = local[s];
    }
  }
  return best;
}

} // namespace flowcll::models
