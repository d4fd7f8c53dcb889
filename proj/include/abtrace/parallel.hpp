#pragma once

#include <cstddef>
#include <functional>

namespace abtrace {

/// Worker cap: min(hardware_concurrency, ABILITY_TRACE_THREADS if set).
std::size_t max_threads();

/// Runs fn(0..n-1) across worker threads. Callers must write to disjoint
/// slots; results are then independent of the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace abtrace
