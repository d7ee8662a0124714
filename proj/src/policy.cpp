#include "ppa/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace ppa {

using nlohmann::json;

int feature_length(int physicians) { return 2 + 6 * physicians; }

FeatureVector extract_features(const SystemState& state,
                               const CostParams& params) {
  FeatureVector x;
  x.values.reserve(feature_length(params.physicians));
  x.values.push_back(state.patient.duration / params.session_minutes);
  x.values.push_back(static_cast<double>(state.patient.priority - 1));
  for (int p = 1; p <= params.physicians; ++p) {
    const PhysicianState& phys = state.physician(p);
    const double cap = static_cast<double>(params.cap_for(p));
    x.values.push_back(phys.is_preferred ? 1.0 : 0.0);
    x.values.push_back(phys.slots_left / cap);
    x.values.push_back(phys.priority1_count / cap);
    x.values.push_back(phys.workload / params.session_minutes);
    x.values.push_back(state.eligibility[p - 1] ? 1.0 : 0.0);
    x.values.push_back(is_feasible(state, Action{p}, params) ? 1.0 : 0.0);
  }
  return x;
}

void PolicyParams::validate_shapes() const {
  if (input < 1 || hidden < 1 || outputs < 1)
    throw Error("invalid_policy", "non-positive layer size");
  if (w1.size() != static_cast<std::size_t>(hidden) * input ||
      b1.size() != static_cast<std::size_t>(hidden) ||
      w2.size() != static_cast<std::size_t>(outputs) * hidden ||
      b2.size() != static_cast<std::size_t>(outputs))
    throw Error("invalid_policy", "weight shapes do not match layer sizes");
  for (double v : w1)
    if (!std::isfinite(v)) throw Error("invalid_policy", "non-finite weight");
  for (double v : w2)
    if (!std::isfinite(v)) throw Error("invalid_policy", "non-finite weight");
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw Error("invalid_config", "learning_rate must be positive");
  if (epochs < 0) throw Error("invalid_config", "epochs must be non-negative");
  if (batch_size < 1) throw Error("invalid_config", "batch_size must be >= 1");
  if (l2 < 0.0) throw Error("invalid_config", "l2 must be non-negative");
}

namespace {

void forward_pass(const PolicyParams& p, const std::vector<double>& x,
                  std::vector<double>& z1, std::vector<double>& h,
                  std::vector<double>& probs) {
  z1.assign(p.hidden, 0.0);
  for (int i = 0; i < p.hidden; ++i) {
    double acc = p.b1[i];
    const double* row = &p.w1[static_cast<std::size_t>(i) * p.input];
    for (int j = 0; j < p.input; ++j) acc += row[j] * x[j];
    z1[i] = acc;
  }
  h.resize(p.hidden);
  for (int i = 0; i < p.hidden; ++i) h[i] = z1[i] > 0.0 ? z1[i] : 0.0;

  std::vector<double> z2(p.outputs);
  for (int a = 0; a < p.outputs; ++a) {
    double acc = p.b2[a];
    const double* row = &p.w2[static_cast<std::size_t>(a) * p.hidden];
    for (int i = 0; i < p.hidden; ++i) acc += row[i] * h[i];
    z2[a] = acc;
  }
  const double zmax = *std::max_element(z2.begin(), z2.end());
  probs.resize(p.outputs);
  double sum = 0.0;
  for (int a = 0; a < p.outputs; ++a) {
    probs[a] = std::exp(z2[a] - zmax);
    sum += probs[a];
  }
  for (double& v : probs) v /= sum;
}

}  // namespace

std::vector<double> policy_forward(const PolicyParams& params,
                                   const FeatureVector& x) {
  params.validate_shapes();
  if (static_cast<int>(x.values.size()) != params.input)
    throw Error("invalid_policy", "feature length does not match the policy input");
  std::vector<double> z1, h, probs;
  forward_pass(params, x.values, z1, h, probs);
  return probs;
}

Action select_action(const std::vector<double>& probs,
                     const std::vector<std::uint8_t>& feasible_mask,
                     SelectMode mode, RngStream& rng) {
  if (probs.size() != feasible_mask.size())
    throw Error("invalid_policy", "mask and probability lengths differ");
  if (!feasible_mask[0])
    throw Error("invalid_policy", "rejection must always stay unmasked");

  if (mode == SelectMode::Greedy) {
    int best = -1;
    for (int a = 0; a < static_cast<int>(probs.size()); ++a) {
      if (!feasible_mask[a]) continue;
      if (best < 0 || probs[a] > probs[best]) best = a;
    }
    return Action{best};
  }

  double mass = 0.0;
  for (int a = 0; a < static_cast<int>(probs.size()); ++a)
    if (feasible_mask[a]) mass += probs[a];
  double u = rng.uniform() * mass;
  int last = 0;
  for (int a = 0; a < static_cast<int>(probs.size()); ++a) {
    if (!feasible_mask[a]) continue;
    last = a;
    u -= probs[a];
    if (u <= 0.0) return Action{a};
  }
  return Action{last};
}

std::vector<std::uint8_t> feasibility_mask(const SystemState& state,
                                           const CostParams& params) {
  std::vector<std::uint8_t> mask(params.physicians + 1, 0);
  mask[0] = 1;
  for (int p = 1; p <= params.physicians; ++p)
    mask[p] = is_feasible(state, Action{p}, params) ? 1 : 0;
  return mask;
}

std::pair<double, PolicyParams> loss_and_grad(const PolicyParams& params,
                                              const std::vector<LabeledExample>& data,
                                              const std::vector<int>& batch,
                                              double l2) {
  params.validate_shapes();
  if (batch.empty()) throw Error("invalid_batch", "empty batch");

  PolicyParams grads = params;
  std::fill(grads.w1.begin(), grads.w1.end(), 0.0);
  std::fill(grads.b1.begin(), grads.b1.end(), 0.0);
  std::fill(grads.w2.begin(), grads.w2.end(), 0.0);
  std::fill(grads.b2.begin(), grads.b2.end(), 0.0);

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> z1, h, probs, dz2, dh;
  for (int index : batch) {
    const LabeledExample& example = data[index];
    const std::vector<double>& x = example.features.values;
    forward_pass(params, x, z1, h, probs);

    double sample_loss = 0.0;
    for (int a = 0; a < params.outputs; ++a)
      if (example.target[a] > 0.0)
        sample_loss -= example.target[a] * std::log(std::max(probs[a], 1e-300));
    if (!std::isfinite(sample_loss))
      throw Error("training_error",
                  "non-finite loss at batch row " + std::to_string(index));
    loss += sample_loss * inv_batch;

    dz2.resize(params.outputs);
    for (int a = 0; a < params.outputs; ++a)
      dz2[a] = (probs[a] - example.target[a]) * inv_batch;
    for (int a = 0; a < params.outputs; ++a) {
      double* grow = &grads.w2[static_cast<std::size_t>(a) * params.hidden];
      for (int i = 0; i < params.hidden; ++i) grow[i] += dz2[a] * h[i];
      grads.b2[a] += dz2[a];
    }
    dh.assign(params.hidden, 0.0);
    for (int a = 0; a < params.outputs; ++a) {
      const double* row = &params.w2[static_cast<std::size_t>(a) * params.hidden];
      for (int i = 0; i < params.hidden; ++i) dh[i] += row[i] * dz2[a];
    }
    for (int i = 0; i < params.hidden; ++i) {
      if (z1[i] <= 0.0) continue;
      double* grow = &grads.w1[static_cast<std::size_t>(i) * params.input];
      for (int j = 0; j < params.input; ++j) grow[j] += dh[i] * x[j];
      grads.b1[i] += dh[i];
    }
  }

  if (l2 > 0.0) {
    double penalty = 0.0;
    for (std::size_t i = 0; i < params.w1.size(); ++i) {
      penalty += params.w1[i] * params.w1[i];
      grads.w1[i] += l2 * params.w1[i];
    }
    for (std::size_t i = 0; i < params.w2.size(); ++i) {
      penalty += params.w2[i] * params.w2[i];
      grads.w2[i] += l2 * params.w2[i];
    }
    loss += 0.5 * l2 * penalty;
  }
  return {loss, std::move(grads)};
}

namespace {

PolicyParams init_params(int input, int outputs, int hidden, RngStream& rng) {
  PolicyParams p;
  p.input = input;
  p.hidden = hidden;
  p.outputs = outputs;
  const double s1 = std::sqrt(6.0 / (input + hidden));
  const double s2 = std::sqrt(6.0 / (hidden + outputs));
  p.w1.resize(static_cast<std::size_t>(hidden) * input);
  p.b1.assign(hidden, 0.0);
  p.w2.resize(static_cast<std::size_t>(outputs) * hidden);
  p.b2.assign(outputs, 0.0);
  for (double& w : p.w1) w = rng.uniform(-s1, s1);
  for (double& w : p.w2) w = rng.uniform(-s2, s2);
  return p;
}

void apply_step(PolicyParams& params, const PolicyParams& grads, double lr) {
  for (std::size_t i = 0; i < params.w1.size(); ++i) params.w1[i] -= lr * grads.w1[i];
  for (std::size_t i = 0; i < params.b1.size(); ++i) params.b1[i] -= lr * grads.b1[i];
  for (std::size_t i = 0; i < params.w2.size(); ++i) params.w2[i] -= lr * grads.w2[i];
  for (std::size_t i = 0; i < params.b2.size(); ++i) params.b2[i] -= lr * grads.b2[i];
}

}  // namespace

TrainResult train(const std::vector<LabeledExample>& data,
                  const TrainConfig& config, const PolicyParams* warm_start) {
  config.validate();
  if (data.empty()) throw Error("invalid_dataset", "cannot train on an empty dataset");
  const int input = static_cast<int>(data.front().features.values.size());
  const int outputs = static_cast<int>(data.front().target.size());

  TrainResult result;
  if (warm_start) {
    warm_start->validate_shapes();
    if (warm_start->input != input || warm_start->outputs != outputs)
      throw Error("invalid_policy", "warm-start shapes do not match the dataset");
    result.params = *warm_start;
  } else {
    RngStream init_rng(config.seed, "policy-init");
    result.params = init_params(input, outputs, 64, init_rng);
  }

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    RngStream shuffle_rng(config.seed, "policy-shuffle",
                          static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
      const std::size_t end =
          std::min(order.size(), at + static_cast<std::size_t>(config.batch_size));
      batch.assign(order.begin() + at, order.begin() + end);
      auto [loss, grads] = loss_and_grad(result.params, data, batch, config.l2);
      apply_step(result.params, grads, config.learning_rate);
      epoch_loss += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(seen));
  }
  return result;
}

RolloutResult simulate_policy(const PolicyParams& policy,
                              const EpisodeRealization& episode,
                              const CostParams& params) {
  RngStream unused(0, "greedy");
  SystemState state = initial_state(episode, params);
  std::vector<Action> actions;
  actions.reserve(episode.patients.size());
  for (int k = 0; k < episode.length(); ++k) {
    const std::vector<double> probs =
        policy_forward(policy, extract_features(state, params));
    const Action a = select_action(probs, feasibility_mask(state, params),
                                   SelectMode::Greedy, unused);
    actions.push_back(a);
    if (k + 1 < episode.length())
      state = transition(state, a, episode.patients[k + 1], params);
  }
  return rollout_cost(episode, actions, params);
}

PolicyParams uniform_policy(int physicians) {
  PolicyParams p;
  p.input = feature_length(physicians);
  p.hidden = 64;
  p.outputs = physicians + 1;
  p.w1.assign(static_cast<std::size_t>(p.hidden) * p.input, 0.0);
  p.b1.assign(p.hidden, 0.0);
  p.w2.assign(static_cast<std::size_t>(p.outputs) * p.hidden, 0.0);
  p.b2.assign(p.outputs, 0.0);
  return p;
}

std::string policy_artifact_to_json(const PolicyArtifact& artifact) {
  json j{{"layout_version", artifact.layout_version},
         {"physicians", artifact.physicians},
         {"feature_length", feature_length(artifact.physicians)},
         {"hidden", artifact.params.hidden},
         {"activation", "relu"},
         {"w1", artifact.params.w1},
         {"b1", artifact.params.b1},
         {"w2", artifact.params.w2},
         {"b2", artifact.params.b2},
         {"train_config",
          {{"learning_rate", artifact.train_config.learning_rate},
           {"epochs", artifact.train_config.epochs},
           {"batch_size", artifact.train_config.batch_size},
           {"seed", artifact.train_config.seed},
           {"l2", artifact.train_config.l2}}},
         {"dataset_fingerprint", artifact.dataset_fingerprint}};
  return j.dump(2);
}

PolicyArtifact policy_artifact_from_json(const std::string& text) {
  json j = json::parse(text);
  PolicyArtifact artifact;
  artifact.layout_version = j.at("layout_version").get<int>();
  if (artifact.layout_version != kFeatureLayoutVersion)
    throw Error("artifact_version",
                "unsupported feature layout version " +
                    std::to_string(artifact.layout_version));
  artifact.physicians = j.at("physicians").get<int>();
  artifact.params.input = j.at("feature_length").get<int>();
  if (artifact.params.input != feature_length(artifact.physicians))
    throw Error("artifact_version", "feature length does not match physician count");
  artifact.params.hidden = j.at("hidden").get<int>();
  artifact.params.outputs = artifact.physicians + 1;
  artifact.params.w1 = j.at("w1").get<std::vector<double>>();
  artifact.params.b1 = j.at("b1").get<std::vector<double>>();
  artifact.params.w2 = j.at("w2").get<std::vector<double>>();
  artifact.params.b2 = j.at("b2").get<std::vector<double>>();
  artifact.params.validate_shapes();
  const json& t = j.at("train_config");
  artifact.train_config.learning_rate = t.at("learning_rate").get<double>();
  artifact.train_config.epochs = t.at("epochs").get<int>();
  artifact.train_config.batch_size = t.at("batch_size").get<int>();
  artifact.train_config.seed = t.at("seed").get<std::uint64_t>();
  artifact.train_config.l2 = t.at("l2").get<double>();
  artifact.dataset_fingerprint = j.at("dataset_fingerprint").get<std::uint64_t>();
  return artifact;
}

void save_policy_artifact(const std::string& path, const PolicyArtifact& artifact) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot open " + path + " for writing");
  out << policy_artifact_to_json(artifact) << '\n';
}

PolicyArtifact load_policy_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return policy_artifact_from_json(buffer.str());
}

}  // namespace ppa
