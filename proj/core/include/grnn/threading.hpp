#ifndef GRNN_THREADING_HPP
#define GRNN_THREADING_HPP

#include <cstdint>
#include <functional>

namespace grnn {

// Number of worker threads kernels may use. Resolution order:
// set_max_threads() if called, else the GRNN_THREADS environment variable,
// else hardware concurrency. 0 means auto.
int max_threads();
void set_max_threads(int n);

// Splits [0, n) into contiguous chunks and runs `fn(begin, end)` on the
// workers. Chunk boundaries depend only on n and the thread count, and every
// index is processed exactly once, so kernels that write disjoint outputs
// stay bit-identical regardless of parallelism.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace grnn

#endif  // GRNN_THREADING_HPP
