#include "ppa/experts.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ppa/parallel.hpp"

namespace ppa {

namespace {

class StopWatch {
 public:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

double finite_gap(double gap) { return std::isfinite(gap) ? gap : 0.0; }

SolveLimits split_limits(const SolveLimits& limits, int parts) {
  SolveLimits per;
  per.gap_limit = limits.gap_limit;
  if (limits.time_limit) per.time_limit = *limits.time_limit / parts;
  if (limits.node_limit)
    per.node_limit = std::max(1LL, *limits.node_limit / parts);
  return per;
}

}  // namespace

EpisodeContext EpisodeContext::sampling(const SystemState& state,
                                        const CostParams& params,
                                        const GenConfig& gen) {
  EpisodeContext context;
  context.epoch = state.epoch;
  context.current_score = state.patient.arrival_score;
  context.residual = residual_of(state, params);
  context.gen_config = &gen;
  return context;
}

EpisodeContext EpisodeContext::hindsight(const SystemState& state,
                                         const CostParams& params,
                                         std::vector<Patient> future) {
  EpisodeContext context;
  context.epoch = state.epoch;
  context.current_score = state.patient.arrival_score;
  context.residual = residual_of(state, params);
  context.realized_future = std::move(future);
  return context;
}

ExpertLabel ExpertLabel::hard(Action a, ExpertCallStats s) {
  ExpertLabel label;
  label.kind = Kind::Hard;
  label.action = a;
  label.stats = s;
  return label;
}

ExpertLabel ExpertLabel::soft(std::vector<double> freq, ExpertCallStats s) {
  ExpertLabel label;
  label.kind = Kind::Soft;
  label.frequencies = std::move(freq);
  label.stats = s;
  return label;
}

Action ExpertLabel::executed_action() const {
  if (kind == Kind::Hard) return action;
  int best = 0;
  for (int a = 1; a < static_cast<int>(frequencies.size()); ++a)
    if (frequencies[a] > frequencies[best]) best = a;
  return Action{best};
}

std::vector<double> ExpertLabel::target_distribution(int physicians) const {
  if (kind == Kind::Soft) return frequencies;
  std::vector<double> one_hot(physicians + 1, 0.0);
  one_hot[action.value] = 1.0;
  return one_hot;
}

std::vector<double> aggregate_frequency(const std::vector<Action>& actions,
                                        int physicians) {
  if (actions.empty())
    throw Error("invalid_label", "cannot aggregate an empty action list");
  std::vector<double> freq(physicians + 1, 0.0);
  for (Action a : actions) freq[a.value] += 1.0;
  for (double& f : freq) f /= static_cast<double>(actions.size());
  return freq;
}

ExpertLabel myopic_action(const SystemState& state, const CostParams& params,
                          RngStream& rng) {
  StopWatch watch;
  ExpertCallStats stats;
  Action choice{0};
  if (is_feasible(state, Action{state.patient.preferred}, params)) {
    choice = Action{state.patient.preferred};
  } else {
    std::vector<Action> options;
    for (int p : state.patient.eligible)
      if (is_feasible(state, Action{p}, params)) options.push_back(Action{p});
    if (!options.empty())
      choice = options[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(options.size()) - 1))];
  }
  stats.wall_time = watch.elapsed();
  return ExpertLabel::hard(choice, stats);
}

namespace {

// Shared by the deterministic and hindsight experts: solve the static
// model over the current patient plus a known/assumed future and read off
// the current patient's decision.
ExpertLabel solve_joint_instance(const SystemState& state,
                                 const ResidualCapacity& residual,
                                 const std::vector<Patient>& future,
                                 const CostParams& params,
                                 const SolveLimits& limits) {
  StopWatch watch;
  std::vector<Patient> patients;
  patients.reserve(future.size() + 1);
  patients.push_back(state.patient);
  patients.insert(patients.end(), future.begin(), future.end());

  const MilpModel model = build_ppa_model(patients, residual, params);
  const MipSolution solution = solve_mip(model, limits);

  ExpertCallStats stats;
  stats.wall_time = watch.elapsed();
  stats.gap = finite_gap(solution.gap);
  stats.n_sub_solves = 1;
  stats.reached_limit = solution.status != SolveStatus::Optimal;
  return ExpertLabel::hard(extract_action(model, solution.values, 0, state.patient),
                           stats);
}

}  // namespace

ExpertLabel deterministic_action(const SystemState& state,
                                 const EpisodeContext& context,
                                 const CostParams& params,
                                 const SolveLimits& limits, RngStream& rng) {
  if (context.realized_future)
    throw Error("invalid_context",
                "the deterministic expert must not see the realized future");
  const ScenarioSet scenario = sample_future_scenarios(context, 1, rng);
  return solve_joint_instance(state, context.residual,
                              scenario.scenarios.front().patients, params,
                              limits);
}

FullInfoLabels full_information_labels(const EpisodeRealization& realization,
                                       const CostParams& params,
                                       const SolveLimits& limits) {
  realization.validate();
  const MilpModel model =
      build_ppa_model(realization.patients, ResidualCapacity::full(params), params);
  FullInfoLabels result;
  result.solution = solve_mip(model, limits);
  result.optimal = result.solution.status == SolveStatus::Optimal;
  result.actions.reserve(realization.patients.size());
  for (std::size_t k = 0; k < realization.patients.size(); ++k)
    result.actions.push_back(extract_action(model, result.solution.values,
                                            static_cast<int>(k),
                                            realization.patients[k]));
  return result;
}

ExpertLabel full_information_action(const SystemState& state,
                                    const EpisodeContext& context,
                                    const CostParams& params,
                                    const SolveLimits& limits) {
  if (!context.realized_future)
    throw Error("invalid_context",
                "the hindsight expert needs the realized future");
  return solve_joint_instance(state, context.residual, *context.realized_future,
                              params, limits);
}

ExpertLabel two_stage_action(const SystemState& state,
                             const EpisodeContext& context, int n_scenarios,
                             const CostParams& params, const SolveLimits& limits,
                             RngStream& rng) {
  if (n_scenarios < 1)
    throw Error("invalid_config", "two-stage expert needs at least one scenario");
  if (context.realized_future)
    throw Error("invalid_context",
                "the two-stage expert must not see the realized future");
  StopWatch watch;
  const ScenarioSet scenarios =
      sample_future_scenarios(context, n_scenarios, rng);
  const SppaEnumerationResult result = solve_sppa_by_enumeration(
      state.patient, scenarios, context.residual, params, limits);

  ExpertCallStats stats;
  stats.wall_time = watch.elapsed();
  stats.gap = finite_gap(result.max_gap);
  stats.n_sub_solves =
      (static_cast<int>(state.patient.eligible.size()) + 1) * n_scenarios;
  stats.reached_limit = result.reached_limit;
  return ExpertLabel::hard(result.first_action, stats);
}

ExpertLabel aggregated_deterministic(const SystemState& state,
                                     const EpisodeContext& context,
                                     int n_scenarios, const CostParams& params,
                                     const SolveLimits& limits, RngStream& rng) {
  if (n_scenarios < 1)
    throw Error("invalid_config",
                "aggregated deterministic expert needs at least one call");
  StopWatch watch;
  const SolveLimits per_call = split_limits(limits, n_scenarios);

  std::vector<ExpertLabel> calls(n_scenarios);
  parallel_for(n_scenarios, [&](int j) {
    RngStream call_rng = rng.fork(static_cast<std::uint64_t>(j));
    calls[j] = deterministic_action(state, context, params, per_call, call_rng);
  });

  std::vector<Action> actions;
  actions.reserve(n_scenarios);
  ExpertCallStats stats;
  for (const ExpertLabel& call : calls) {
    actions.push_back(call.action);
    stats.gap = std::max(stats.gap, call.stats.gap);
    stats.n_sub_solves += call.stats.n_sub_solves;
    stats.reached_limit = stats.reached_limit || call.stats.reached_limit;
  }
  stats.wall_time = watch.elapsed();
  return ExpertLabel::soft(aggregate_frequency(actions, params.physicians), stats);
}

}  // namespace ppa
