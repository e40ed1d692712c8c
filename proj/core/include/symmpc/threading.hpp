#pragma once

#include <cstddef>
#include <functional>

namespace symmpc {

/// Worker-thread cap from SYMM_THREADS. 0 means single-threaded deterministic
/// mode. Unset falls back to the hardware concurrency.
std::size_t worker_threads();

/// Runs fn(begin, end) over [0, n) split into fixed-size chunks. Chunk
/// boundaries do not depend on the thread count, so any per-chunk results
/// combined in chunk order are identical to a serial run.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace symmpc
