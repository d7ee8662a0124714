// Compares the serial reference path (one worker) against the OpenMP
// worker pool on the two hot loops: paired policy evaluation and
// two-stage expert labeling. Asserts that both paths produce identical
// results before reporting the speedup.

#include <chrono>
#include <cstdio>
#include <string>

#include "ppa/harness.hpp"
#include "ppa/parallel.hpp"

namespace {

double wall() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

ppa::RunConfig bench_config(int episodes, int scenarios) {
  ppa::RunConfig config;
  config.gen.mu_k = 30.0;
  config.gen.sigma_k = 4.0;
  config.costs.session_minutes = 110.0;
  config.costs.appointment_caps = {7, 7, 7, 7};
  config.expert.n_scenarios = scenarios;
  config.eval.n_episodes = episodes;
  config.eval.seed_base = 4242;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  const int episodes = argc > 1 ? std::atoi(argv[1]) : 40;
  const int scenarios = argc > 2 ? std::atoi(argv[2]) : 5;
  const ppa::RunConfig config = bench_config(episodes, scenarios);

  std::printf("paired evaluation over %d episodes, %d scenarios per expert call\n",
              episodes, scenarios);

  ppa::set_worker_count(1);
  double t0 = wall();
  const ppa::MetricsRow serial =
      ppa::evaluate_policy(ppa::PolicyRef::two_stage(scenarios), config, "serial");
  const double serial_seconds = wall() - t0;

  ppa::set_worker_count(0);  // fall back to PPA_WORKERS / all cores
  const int threads = ppa::worker_count();
  t0 = wall();
  const ppa::MetricsRow parallel = ppa::evaluate_policy(
      ppa::PolicyRef::two_stage(scenarios), config, "parallel");
  const double parallel_seconds = wall() - t0;

  const bool identical = serial.avg_cost == parallel.avg_cost &&
                         serial.p1_rejected == parallel.p1_rejected &&
                         serial.p2_rejected == parallel.p2_rejected &&
                         serial.undesirable == parallel.undesirable;
  std::printf("serial   (1 worker)  : %8.2fs  avg_cost=%.4f\n", serial_seconds,
              serial.avg_cost);
  std::printf("parallel (%d workers): %8.2fs  avg_cost=%.4f\n", threads,
              parallel_seconds, parallel.avg_cost);
  std::printf("results identical    : %s\n", identical ? "yes" : "NO");
  std::printf("speedup              : %.2fx\n",
              parallel_seconds > 0 ? serial_seconds / parallel_seconds : 0.0);
  return identical ? 0 : 1;
}
