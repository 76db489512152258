#pragma once

#include <functional>

namespace geodesic_atlas {

/// Worker count from GEODESIC_ATLAS_THREADS (0 or unset: hardware concurrency).
int thread_budget();

/// Runs fn(0..n-1) on up to `threads` workers. Each index runs exactly once;
/// the first exception thrown is rethrown after all workers finish.
void parallel_for(int n, const std::function<void(int)>& fn, int threads = thread_budget());

}  // namespace geodesic_atlas
