#include "ppa/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ppa {

void GenConfig::validate() const {
  if (physicians < 1) throw Error("invalid_config", "need at least one physician");
  if (static_cast<int>(physician_weights.size()) != physicians)
    throw Error("invalid_config", "physician_weights length must equal physician count");
  double sum = 0.0;
  for (double w : physician_weights) {
    if (w < 0.0) throw Error("invalid_config", "physician weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error("invalid_config", "physician weights must sum to 1");
  if (sigma_k <= 0.0) throw Error("invalid_config", "sigma_k must be positive");
  if (p_class1 <= 0.0 || p_class1 >= 1.0)
    throw Error("invalid_config", "p_class1 must lie in (0,1)");
  if (!(1 <= eligibility_min && eligibility_min <= eligibility_max &&
        eligibility_max <= physicians))
    throw Error("invalid_config", "need 1 <= k_min <= k_max <= P");
  if (alpha <= 0.0) throw Error("invalid_config", "alpha must be positive");
  for (const auto& [a, b] : beta_params)
    if (a <= 0.0 || b <= 0.0) throw Error("invalid_config", "beta parameters must be positive");
  for (const auto& [mu, sg] : lognormal_params)
    if (sg <= 0.0) throw Error("invalid_config", "lognormal sigma must be positive");
}

std::vector<double> dirichlet_alpha(const GenConfig& config) {
  std::vector<double> a(config.physician_weights.size());
  for (std::size_t p = 0; p < a.size(); ++p)
    a[p] = config.alpha * config.physician_weights[p];
  return a;
}

namespace {

std::vector<double> sample_taste(const GenConfig& config, RngStream& rng) {
  const std::vector<double> a = dirichlet_alpha(config);
  std::vector<double> z(a.size());
  double sum = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    z[p] = rng.gamma(a[p], 1.0);
    sum += z[p];
  }
  if (sum <= 0.0) {  // all-zero gamma draws cannot realistically happen
    std::fill(z.begin(), z.end(), 1.0 / static_cast<double>(z.size()));
    return z;
  }
  for (double& v : z) v /= sum;
  return z;
}

// Class-conditional attributes shared by episode and scenario sampling.
// The arrival score is produced by `score`, everything else is common.
template <class ScoreFn>
Patient sample_patient(const GenConfig& config, RngStream& rng, ScoreFn&& score) {
  Patient patient;
  patient.priority = rng.bernoulli(config.p_class1) ? 1 : 2;
  patient.arrival_score = score(patient.priority);
  const auto [mu, sigma] = config.lognormal_params[patient.priority - 1];
  patient.duration = rng.lognormal(mu, sigma);
  auto [eligible, preferred] = sample_eligibility(config, rng);
  patient.eligible = std::move(eligible);
  patient.preferred = preferred;
  return patient;
}

void sort_and_number(std::vector<Patient>& patients) {
  std::stable_sort(patients.begin(), patients.end(),
                   [](const Patient& a, const Patient& b) {
                     return a.arrival_score < b.arrival_score;
                   });
  for (std::size_t i = 0; i < patients.size(); ++i)
    patients[i].id = static_cast<int>(i);
}

}  // namespace

std::pair<std::vector<int>, int> sample_eligibility(const GenConfig& config,
                                                    RngStream& rng) {
  const std::vector<double> z = sample_taste(config, rng);
  const int set_size = static_cast<int>(
      rng.uniform_int(config.eligibility_min, config.eligibility_max));

  std::vector<int> order(z.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&z](int a, int b) { return z[a] > z[b]; });

  std::vector<int> eligible(order.begin(), order.begin() + set_size);
  for (int& p : eligible) p += 1;
  std::sort(eligible.begin(), eligible.end());

  double mass = 0.0;
  for (int p : eligible) mass += z[p - 1];
  double u = rng.uniform() * mass;
  int preferred = eligible.back();
  for (int p : eligible) {
    u -= z[p - 1];
    if (u <= 0.0) {
      preferred = p;
      break;
    }
  }
  return {std::move(eligible), preferred};
}

EpisodeRealization sample_episode(const GenConfig& config, RngStream& rng) {
  EpisodeRealization episode;
  episode.seed = rng.seed();
  episode.physician_count = config.physicians;

  const long long drawn = std::llround(rng.normal(config.mu_k, config.sigma_k));
  const int total = static_cast<int>(std::max(1LL, drawn));
  episode.patients.reserve(total);
  for (int i = 0; i < total; ++i) {
    episode.patients.push_back(sample_patient(config, rng, [&](int priority) {
      const auto [a, b] = config.beta_params[priority - 1];
      return rng.beta(a, b);
    }));
  }
  sort_and_number(episode.patients);
  return episode;
}

ScenarioSet sample_future_scenarios(int anchor_epoch, double anchor_score,
                                    int n, RngStream& rng,
                                    const GenConfig& config) {
  ScenarioSet set;
  set.anchor_epoch = anchor_epoch;
  set.anchor_score = anchor_score;
  if (n <= 0) return set;

  const int seen = anchor_epoch + 1;  // patients revealed so far
  set.scenarios.reserve(n);
  for (int s = 0; s < n; ++s) {
    long long total;
    do {
      total = std::llround(rng.normal(config.mu_k, config.sigma_k));
    } while (total < seen);

    EpisodeRealization scenario;
    scenario.seed = rng.seed();
    scenario.physician_count = config.physicians;
    const int future = static_cast<int>(total) - seen;
    scenario.patients.reserve(future);
    for (int i = 0; i < future; ++i) {
      scenario.patients.push_back(sample_patient(config, rng, [&](int priority) {
        const auto [a, b] = config.beta_params[priority - 1];
        // Truncated draw: rejection-sample the class Beta into (anchor, 1].
        for (int attempt = 0; attempt < 10000; ++attempt) {
          const double x = rng.beta(a, b);
          if (x > anchor_score) return x;
        }
        // Acceptance region has all but vanished; place the score inside it.
        return anchor_score + (1.0 - anchor_score) * rng.uniform();
      }));
    }
    sort_and_number(scenario.patients);
    set.scenarios.push_back(std::move(scenario));
  }
  return set;
}

}  // namespace ppa
