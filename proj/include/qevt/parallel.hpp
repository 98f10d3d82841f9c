#pragma once

#include <cstddef>
#include <functional>

namespace qevt {

// Worker count: hardware concurrency, capped by QEVT_THREADS when set.
std::size_t thread_count();

// Runs body(i) for i in [0, count). Work is keyed by index, so results
// written to per-index slots are identical regardless of scheduling.
// The first exception thrown by any body is rethrown on the caller.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace qevt
