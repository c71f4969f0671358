#pragma once

#include <cstddef>
#include <functional>

namespace evdeblur {

/// Caps the number of worker threads used by parallel_for. 0 restores the
/// hardware default. Results never depend on this setting; it only trades
/// wall time.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Splits [begin, end) into contiguous blocks and runs fn(block_begin,
/// block_end) on worker threads. Blocks are disjoint, so writers that stay
/// inside their block need no locking. Exceptions thrown by fn are rethrown
/// on the calling thread after all workers join.
void parallel_for(size_t begin, size_t end, const std::function<void(size_t, size_t)>& fn);

}  // namespace evdeblur
