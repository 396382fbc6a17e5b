#pragma once

#include <cstdint>
#include <functional>

namespace tubelet::core {

// Worker count: TUBELET_THREADS caps it, default is hardware concurrency.
int max_threads();

// Runs body(begin, end) over a partition of [0, n). Each index is processed
// by exactly one invocation, so per-element arithmetic keeps a fixed order
// and results are bit-identical for any thread count. Nested calls run
// serially. `grain` is the minimum chunk size worth shipping to a thread.
void parallel_for(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& body);

}  // namespace tubelet::core
