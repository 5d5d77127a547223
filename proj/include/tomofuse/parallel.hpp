#pragma once

#include <cstddef>
#include <functional>

namespace tomofuse {

/// Worker count used by parallel_for. Initialised from TOMOFUSE_THREADS,
/// falling back to the hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs body(begin, end) over disjoint contiguous chunks of [0, n). Callers
/// only write to outputs owned by their index range, so results do not
/// depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace tomofuse
