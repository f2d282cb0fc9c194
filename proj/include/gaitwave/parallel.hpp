#pragma once

#include <cstddef>
#include <functional>

namespace gaitwave {

// Process-wide worker count used by parallel_for. 1 means run inline.
void set_num_threads(int n);
int num_threads();

// Calls fn(i) for every i in [0, n). Work is split into contiguous chunks,
// one per worker; callers only write to index-owned outputs, so results do
// not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gaitwave
