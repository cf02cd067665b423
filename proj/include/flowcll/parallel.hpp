#pragma once

#include <cstddef>

namespace flowcll {

/// Worker-thread control for the OpenMP kernels. Results never depend on
/// the thread count; only wall-clock time does.
namespace parallel {

std::size_t available_threads();

/// 0 selects every available core.
void set_threads(std::size_t n);

std::size_t current_threads();

} // namespace parallel

} // namespace flowcll
