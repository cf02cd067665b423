#include "flowcll/models/split_search.hpp"
#include "flowcll/models/tree.hpp"

namespace flowcll::models {

std::vector<SplitCandidate> find_best_splits_serial(const SortedColumns& columns,
                                                    const SplitQuery& query) {
  const std::size_t n_slots = query.slot_totals.size();
  std::vector<SplitCandidate> best(n_slots);

  for (std::size_t f = 0; f < columns.n_features(); ++f) {
    const auto column = columns.column(f);
    for (std::size_t s = 0; s < n_slots; ++s) {
      const auto& tot = query.slot_totals[s];
      std::int64_t gl = 0, hl = 0;
      bool seen = false;
      float last = 0.0f;
      for (const auto& e : column) {
        if (query.row_slot[e.row] != static_cast<std::int32_t>(s)) continue;
        if (seen && e.value != last) {
          const double hl_d = from_fixed(hl);
          const double hr_d = from_fixed(tot.hess - hl);
          if (hl_d >= query.min_child_weight && hr_d >= query.min_child_weight) {
            const SplitCandidate cand{
                split_gain(from_fixed(gl), hl_d, from_fixed(tot.grad),
                           from_fixed(tot.hess), query.lambda, query.gamma),
                static_cast<std::int32_t>(f), split_threshold(last, e.value)};
            if (better_split(cand, best[s])) best[s] = cand;
          }
        }
        gl += query.grad[e.row];
        hl += query.hess[e.row];
        last = e.value;
        seen = true;
      }
    }
  }
  return best;
}

} // namespace flowcll::models
