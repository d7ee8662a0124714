#include "ppa/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ppa {

namespace {
std::atomic<int> g_worker_override{0};
}

int worker_count() {
  int n = g_worker_override.load();
  if (n > 0) return n;
  if (const char* env = std::getenv("PPA_WORKERS")) {
    n = std::atoi(env);
    if (n > 0) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_worker_count(int n) { g_worker_override.store(n); }

namespace detail {

void run_indexed_loop(int n, const std::function<void(int)>& body) {
  if (n <= 0) return;
  std::exception_ptr first_error;
  std::mutex error_mutex;
#ifdef _OPENMP
  const int threads = worker_count();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail
}  // namespace ppa
