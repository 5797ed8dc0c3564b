#pragma once

#include <cstddef>
#include <functional>

namespace metacog {

// Worker count: METACOG_THREADS when set to a positive integer, otherwise
// the hardware concurrency (at least 1).
unsigned worker_count();

// Runs fn(0..n-1) across the given number of workers. Results must go into
// preallocated per-index slots; outputs must not depend on scheduling. The
// first exception thrown by any call is rethrown after the pool drains.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  parallel_for(n, worker_count(), fn);
}

}  // namespace metacog
