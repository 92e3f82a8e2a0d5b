#include "qrwald/parallel.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace qrwald {

namespace {
std::atomic<unsigned> g_max_threads{0};
thread_local bool t_inside_worker = false;
}  // namespace

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads() {
  unsigned m = g_max_threads.load();
  if (m == 0) {
    m = std::thread::hardware_concurrency();
    if (m == 0) m = 1;
  }
  return m;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const unsigned cap = max_threads();
  if (t_inside_worker || cap <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }

  const unsigned nthreads = static_cast<unsigned>(
      std::min<std::size_t>(cap, count));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(nthreads);

  auto worker = [&](unsigned tid) {
    t_inside_worker = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        body(i);
      } catch (...) {
        if (!errors[tid]) errors[tid] = std::current_exception();
      }
    }
    t_inside_worker = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(nthreads - 1);
  for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& th : pool) th.join();

  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qrwald
