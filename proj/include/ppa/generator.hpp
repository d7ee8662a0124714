#pragma once

#include <array>
#include <utility>
#include <vector>

#include "ppa/core.hpp"
#include "ppa/rng.hpp"

namespace ppa {

/// Arrival-process parameters. Defaults reproduce the full-scale profile;
/// the desk profile ships in configs/desk.json.
struct GenConfig {
  double mu_k = 100.0;
  double sigma_k = 8.0;
  double p_class1 = 0.3;
  // (a, b) of the arrival-score Beta and (mu, sigma) of the duration
  // lognormal, indexed by priority class - 1.
  std::array<std::pair<double, double>, 2> beta_params{{{3.0, 1.0}, {1.0, 1.0}}};
  std::array<std::pair<double, double>, 2> lognormal_params{{{3.0, 0.8}, {2.3, 0.3}}};
  std::vector<double> physician_weights{0.4, 0.3, 0.15, 0.15};
  double alpha = 25.0;  // Dirichlet concentration around the weights
  int eligibility_min = 1;
  int eligibility_max = 4;
  int physicians = 4;

  void validate() const;
};

/// Sampled continuations of an episode: future patients only, every
/// arrival score strictly above the anchor, each scenario sorted.
struct ScenarioSet {
  std::vector<EpisodeRealization> scenarios;
  int anchor_epoch = 0;
  double anchor_score = 0.0;

  int size() const { return static_cast<int>(scenarios.size()); }
};

/// Dirichlet parameter vector alpha * w used for patient tastes.
std::vector<double> dirichlet_alpha(const GenConfig& config);

/// Draws (eligible set, preferred physician): tastes z ~ Dirichlet(alpha*w),
/// eligible = top-K tastes with K uniform on [eligibility_min, eligibility_max],
/// preferred sampled within the eligible set proportionally to z.
std::pair<std::vector<int>, int> sample_eligibility(const GenConfig& config,
                                                    RngStream& rng);

EpisodeRealization sample_episode(const GenConfig& config, RngStream& rng);

/// Conditional futures for a decision at epoch `anchor_epoch` whose current
/// patient has score `anchor_score`: the session total is redrawn until it
/// covers the patients already seen, and future scores are the class Beta
/// truncated to (anchor_score, 1].
ScenarioSet sample_future_scenarios(int anchor_epoch, double anchor_score,
                                    int n, RngStream& rng,
                                    const GenConfig& config);

}  // namespace ppa
