#pragma once

#include <cstddef>
#include <functional>

namespace vibias {

/// Worker count: hardware concurrency, capped by VIBIAS_THREADS when set.
std::size_t thread_budget();

/// Runs body(i) for i in [0, n) on up to thread_budget() threads. Each index
/// runs exactly once; callers write results into per-index slots. The first
/// exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace vibias
