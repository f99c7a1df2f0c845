#pragma once

#include <exception>
#include <functional>
#include <vector>

namespace deepen {

/// Process-wide worker-count setting (0 = hardware default). Results never
/// depend on it: work items are independent and reductions happen in index
/// order after the parallel region.
void set_num_threads(int n);
int num_threads();

/// Runs fn(0..n-1), possibly in parallel. The first exception (by index) is
/// rethrown after all items finish.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace deepen
