#pragma once

#include <cstddef>
#include <functional>

namespace subheat {

/// Worker count from SUBHEAT_THREADS; 0 or unset means hardware concurrency.
std::size_t worker_count();

/// Run body(i) for i in [0, count) on up to worker_count() threads. Each
/// index is handled exactly once; results must be written to per-index
/// slots so the outcome does not depend on scheduling. The first exception
/// thrown by any body is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

} // namespace subheat
