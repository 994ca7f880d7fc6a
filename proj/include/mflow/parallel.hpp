#pragma once

#include <functional>

namespace mflow {

// Worker count from MANIFOLD_FLOW_THREADS, defaulting to the hardware
// concurrency. Always at least 1.
int worker_count();

// Runs body(i) for i in [0, n) on up to worker_count() threads using static
// contiguous chunks. Bodies must write disjoint data. The exception from the
// lowest failing index is rethrown on the caller's thread.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace mflow
