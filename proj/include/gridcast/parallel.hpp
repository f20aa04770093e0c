#ifndef GRIDCAST_PARALLEL_HPP
#define GRIDCAST_PARALLEL_HPP

// Minimal data-parallel loop used for per-station fits and per-target
// kriging. The thread count is taken from the GRIDCAST_THREADS
// environment variable (clamped to [1, 256]) and falls back to the
// hardware concurrency. Work items write to caller-indexed slots, so
// results never depend on scheduling.

#include <cstddef>
#include <functional>

namespace gridcast {

// Resolved once per process.
int max_threads();

// Runs fn(0) ... fn(n-1), possibly concurrently. fn must be safe to
// call from multiple threads for distinct indices. Exceptions thrown
// by fn are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace gridcast

#endif
