#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace fredholm {

/// Runs body(i) for i in [0, n) on up to `workers` threads with static
/// chunking. Exceptions from the body are rethrown on the calling thread
/// (the one with the lowest index wins).
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

/// Sum in a fixed binary-tree order, independent of thread count.
double pairwise_sum(std::span<const double> values);

/// Pairwise sum of values[i * stride], i in [0, count).
double pairwise_sum_strided(const double* values, std::size_t count, std::size_t stride);

}  // namespace fredholm
