#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace phel {

// Pairwise reduction with a tree that depends only on the element count.
// All norm-type reductions go through this so that results are bitwise
// independent of the degree of parallelism.
double pairwise_sum(std::span<const double> values);

// Splits [0, count) into contiguous ranges and runs fn(begin, end) on worker
// threads. Each index's work must be a pure function of the inputs; the split
// never feeds a reduction directly.
void parallel_for(std::size_t count, unsigned nthreads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

// 0 -> hardware concurrency (clamped), otherwise the request itself.
unsigned resolve_threads(unsigned requested);

} // namespace phel
