#pragma once

#include <cstddef>
#include <functional>

namespace funlag {

// Runs body(0..n-1) on up to `threads` workers. If several calls throw, the
// exception from the lowest index is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace funlag
