#pragma once

#include <cstddef>
#include <functional>

namespace mixflow {

/// Worker count: MIXFLOW_THREADS when set and > 0, else the hardware
/// concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Results must be
/// written by index; the first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t workers = 0);

} // namespace mixflow
