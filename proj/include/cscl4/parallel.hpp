#pragma once

#include <cstddef>
#include <functional>

namespace cscl4 {

// Worker cap for parallel_for; 0 restores the default (hardware concurrency).
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs fn(i) for i in [0, n). Each index is handled exactly once; callers write
// to per-index slots so results do not depend on scheduling. The first
// exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace cscl4
