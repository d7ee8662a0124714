#pragma once

#include <optional>
#include <vector>

#include "ppa/core.hpp"
#include "ppa/generator.hpp"
#include "ppa/milp.hpp"
#include "ppa/rng.hpp"

namespace ppa {

/// Episode-progress information the experts need beyond the bare state:
/// where we are in the booking horizon and what capacity is left.
/// `realized_future` is populated only for the full-information expert.
struct EpisodeContext {
  int epoch = 0;
  double current_score = 0.0;
  ResidualCapacity residual;
  std::optional<std::vector<Patient>> realized_future;
  const GenConfig* gen_config = nullptr;

  static EpisodeContext sampling(const SystemState& state,
                                 const CostParams& params,
                                 const GenConfig& gen);
  static EpisodeContext hindsight(const SystemState& state,
                                  const CostParams& params,
                                  std::vector<Patient> future);
};

inline ScenarioSet sample_future_scenarios(const EpisodeContext& context, int n,
                                           RngStream& rng) {
  if (!context.gen_config)
    throw Error("invalid_context", "scenario sampling needs a generator config");
  return sample_future_scenarios(context.epoch, context.current_score, n, rng,
                                 *context.gen_config);
}

struct ExpertCallStats {
  double wall_time = 0.0;
  double gap = 0.0;
  int n_sub_solves = 0;
  bool reached_limit = false;
};

/// Target produced by one expert query: either a single action or an
/// action-frequency vector over {0..P}.
struct ExpertLabel {
  enum class Kind { Hard, Soft };

  Kind kind = Kind::Hard;
  Action action;
  std::vector<double> frequencies;  // length P+1, Soft only
  ExpertCallStats stats;

  static ExpertLabel hard(Action a, ExpertCallStats s = {});
  static ExpertLabel soft(std::vector<double> freq, ExpertCallStats s = {});

  /// Hard action, or the argmax of a Soft vector with ties to the lowest
  /// index.
  Action executed_action() const;
  /// One-hot (Hard) or the frequencies (Soft); length physis + 1.
  std::vector<double> target_distribution(int physicians) const;
};

/// Action frequencies over {0..P}; components sum to one.
std::vector<double> aggregate_frequency(const std::vector<Action>& actions,
                                        int physicians);

/// Preferred physician if feasible, otherwise one of the feasible eligible
/// physicians uniformly at random, otherwise reject.
ExpertLabel myopic_action(const SystemState& state, const CostParams& params,
                          RngStream& rng);

/// Solves the static model over the current patient plus one sampled
/// future and returns the current patient's decision.
ExpertLabel deterministic_action(const SystemState& state,
                                 const EpisodeContext& context,
                                 const CostParams& params,
                                 const SolveLimits& limits, RngStream& rng);

struct FullInfoLabels {
  std::vector<Action> actions;
  bool optimal = false;
  MipSolution solution;
};

/// One optimization over the whole realized episode at full capacity;
/// the per-patient actions replay to exactly the model optimum.
FullInfoLabels full_information_labels(const EpisodeRealization& realization,
                                       const CostParams& params,
                                       const SolveLimits& limits = {});

/// Hindsight relabeling of an off-trajectory state: the realized future is
/// known, capacities are whatever the trajectory left behind.
ExpertLabel full_information_action(const SystemState& state,
                                    const EpisodeContext& context,
                                    const CostParams& params,
                                    const SolveLimits& limits = {});

/// Here-and-now action minimizing immediate cost plus the mean optimal
/// recourse over sampled scenarios.
ExpertLabel two_stage_action(const SystemState& state,
                             const EpisodeContext& context, int n_scenarios,
                             const CostParams& params, const SolveLimits& limits,
                             RngStream& rng);

/// n_scenarios independent deterministic queries, one scenario each,
/// aggregated into an action-frequency label.
ExpertLabel aggregated_deterministic(const SystemState& state,
                                     const EpisodeContext& context,
                                     int n_scenarios, const CostParams& params,
                                     const SolveLimits& limits, RngStream& rng);

}  // namespace ppa
