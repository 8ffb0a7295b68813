#pragma once

#include <functional>

namespace dlvmc {

/// Number of worker threads used by parallel_blocks (default: hardware).
void set_thread_count(int n);
int thread_count();

/// Walker-block size used everywhere batched work is partitioned. Fixed so
/// that results are independent of the thread count: blocks are always the
/// same, only their assignment to threads varies.
inline constexpr int kWalkerBlock = 32;

/// Run fn(begin, end) over [0, n) split into kWalkerBlock-sized blocks.
/// Blocks are disjoint; fn must only write state owned by its block.
void parallel_blocks(int n, const std::function<void(int, int)>& fn);

}  // namespace dlvmc
