#pragma once

#include <cstddef>
#include <functional>

namespace mixq {

// Worker count: MIXQ_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = thread_count()).
// Indices are split into contiguous chunks; callers write results by index,
// so output order never depends on scheduling. The first exception thrown by
// any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = 0);

}  // namespace mixq
