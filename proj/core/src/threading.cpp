#include "symmpc/threading.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace symmpc {

std::size_t worker_threads() {
  if (const char* env = std::getenv("SYMM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 0) return static_cast<std::size_t>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

namespace {
thread_local bool inside_worker = false;
}

// Chunk boundaries depend only on n and chunk, never on the thread count, so
// any per-chunk partial results combine identically under 0, 1, or N workers.
// Calls made from inside a worker run inline; only the outermost level spawns.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk == 0) chunk = 1;
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  const std::size_t workers =
      inside_worker ? std::size_t{1} : std::min(worker_threads(), nchunks);

  if (workers <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      fn(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto drain = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= nchunks || failed.load()) return;
      try {
        fn(c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
        return;
      }
    }
  };
  auto run = [&] {
    const bool prev = inside_worker;
    inside_worker = true;
    drain();
    inside_worker = prev;  // the main thread participates and lives on
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (std::thread& t : pool) t.join();
  if (failed.load() && first_error) std::rethrow_exception(first_error);
}

} // namespace symmpc
