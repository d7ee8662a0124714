#pragma once

#include <exception>
#include <functional>

namespace ppa {

/// Number of workers used by parallel_for: the PPA_WORKERS environment
/// variable if set, otherwise the OpenMP default (1 in serial builds).
int worker_count();

/// Process-wide override, takes precedence over PPA_WORKERS.
void set_worker_count(int n);

namespace detail {
void run_indexed_loop(int n, const std::function<void(int)>& body);
}

/// Runs body(0..n-1) on worker_count() threads. Every iteration writes
/// only its own outputs, so results never depend on the worker count;
/// callers merge in index order. The first exception thrown by any
/// iteration is rethrown after the loop joins.
template <class F>
void parallel_for(int n, F&& body) {
  detail::run_indexed_loop(n, std::function<void(int)>(std::forward<F>(body)));
}

}  // namespace ppa
