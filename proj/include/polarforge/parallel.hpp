#pragma once

#include <cstddef>
#include <functional>

namespace polarforge {

/// Hardware concurrency capped by POLARFORGE_THREADS (when set to a positive integer).
unsigned worker_count();

/// Runs fn(begin, end) over a static partition of [0, n) into at most worker_count()
/// contiguous chunks. Results must not depend on the partition.
void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace polarforge
