#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace prism {

/// Worker cap from PRISM_THREADS (default 1).
int worker_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Each index is
/// handled exactly once; callers write results into index-addressed slots, so
/// output never depends on the number of workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)> &fn);

}  // namespace prism
