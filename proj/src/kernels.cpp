#include "mmda/kernels.hpp"

#include <atomic>

namespace mmda::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

bool parallel_enabled() {
#ifdef _OPENMP
  return g_parallel.load(std::memory_order_relaxed);
#else
  return false;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return parallel_enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

}  // namespace mmda::kernels
