#include "flowcll/parallel.hpp"

#include <omp.h>

namespace flowcll::parallel {

std::size_t available_threads() {
  return static_cast<std::size_t>(omp_get_num_procs());
}

void set_threads(std::size_t n) {
  if (n == 0) n = available_threads();
  omp_set_dynamic(0);
  omp_set_num_threads(static_cast<int>(n));
}

std::size_t current_threads() {
  return static_cast<std::size_t>(omp_get_max_threads());
}

} // namespace flowcll::parallel
