#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppa/core.hpp"
#include "ppa/rng.hpp"

namespace ppa {

inline constexpr int kFeatureLayoutVersion = 1;

/// Normalized state encoding: [duration/T, priority-1] then per physician
/// [preferred, slots_left/L_p, priority1_count/L_p, workload/T, eligible,
/// feasible]. Length 2 + 6P.
struct FeatureVector {
  std::vector<double> values;
};

int feature_length(int physicians);

FeatureVector extract_features(const SystemState& state,
                               const CostParams& params);

/// Single-hidden-layer perceptron over the feature vector; row-major
/// weights, rectifier activation, softmax head over P+1 actions.
struct PolicyParams {
  int input = 0;
  int hidden = 64;
  int outputs = 0;
  std::vector<double> w1;  // hidden x input
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // outputs x hidden
  std::vector<double> b2;  // outputs

  void validate_shapes() const;
  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 50;
  int batch_size = 128;
  std::uint64_t seed = 1;
  double l2 = 1e-4;

  void validate() const;
};

std::vector<double> policy_forward(const PolicyParams& params,
                                   const FeatureVector& x);

enum class SelectMode { Greedy, Sample };

/// Greedy: argmax over unmasked entries, ties to the lowest index.
/// Sample: draw from the renormalized masked distribution.
Action select_action(const std::vector<double>& probs,
                     const std::vector<std::uint8_t>& feasible_mask,
                     SelectMode mode, RngStream& rng);

std::vector<std::uint8_t> feasibility_mask(const SystemState& state,
                                           const CostParams& params);

struct LabeledExample {
  FeatureVector features;
  std::vector<double> target;  // distribution over P+1 actions
};

/// Mean cross-entropy against the target distributions plus an
/// l2/2 * ||W||^2 penalty, with gradients from exact backpropagation.
/// `batch` indexes into `data`.
std::pair<double, PolicyParams> loss_and_grad(const PolicyParams& params,
                                              const std::vector<LabeledExample>& data,
                                              const std::vector<int>& batch,
                                              double l2);

struct TrainResult {
  PolicyParams params;
  std::vector<double> epoch_losses;
};

/// Seeded scaled-uniform init (or `warm_start` when given), then shuffled
/// mini-batch gradient descent at a fixed rate.
TrainResult train(const std::vector<LabeledExample>& data,
                  const TrainConfig& config,
                  const PolicyParams* warm_start = nullptr);

/// Runs the policy greedily through an episode and scores the trajectory.
RolloutResult simulate_policy(const PolicyParams& policy,
                              const EpisodeRealization& episode,
                              const CostParams& params);

/// Zero-weight policy of the right shape: uniform probabilities, so the
/// masked-greedy action is always rejection.
PolicyParams uniform_policy(int physicians);

/// On-disk model artifact.
struct PolicyArtifact {
  int layout_version = kFeatureLayoutVersion;
  int physicians = 0;
  PolicyParams params;
  TrainConfig train_config;
  std::uint64_t dataset_fingerprint = 0;
};

std::string policy_artifact_to_json(const PolicyArtifact& artifact);
PolicyArtifact policy_artifact_from_json(const std::string& text);
void save_policy_artifact(const std::string& path, const PolicyArtifact& artifact);
PolicyArtifact load_policy_artifact(const std::string& path);

}  // namespace ppa
