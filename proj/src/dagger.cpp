#include "ppa/dagger.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "ppa/parallel.hpp"

namespace ppa {

using nlohmann::json;

std::string to_string(ExpertKind kind) {
  switch (kind) {
    case ExpertKind::Myopic: return "myopic";
    case ExpertKind::Deterministic: return "deterministic";
    case ExpertKind::FullInformation: return "full_information";
    case ExpertKind::TwoStage: return "two_stage";
    case ExpertKind::AggregatedDeterministic: return "aggregated_deterministic";
  }
  return "unknown";
}

ExpertKind expert_kind_from_string(const std::string& name) {
  if (name == "myopic") return ExpertKind::Myopic;
  if (name == "deterministic") return ExpertKind::Deterministic;
  if (name == "full_information") return ExpertKind::FullInformation;
  if (name == "two_stage") return ExpertKind::TwoStage;
  if (name == "aggregated_deterministic") return ExpertKind::AggregatedDeterministic;
  throw Error("invalid_config", "unknown expert kind: " + name);
}

void DaggerConfig::validate() const {
  if (iterations < 1) throw Error("invalid_config", "need at least one iteration");
  if (episodes_per_iteration < 1)
    throw Error("invalid_config", "need at least one episode per iteration");
  if (experts.empty()) throw Error("invalid_config", "need at least one expert");
  if (j_rule.constant < 1)
    throw Error("invalid_config", "F_j constant must be >= 1");
  if (j_rule.skip_probability < 0.0 || j_rule.skip_probability >= 1.0)
    throw Error("invalid_config", "skip probability must lie in [0,1)");
  if (decision_rule.kind == DecisionRuleSpec::Kind::Vanilla) {
    if (decision_rule.lambda <= 0.0 || decision_rule.lambda > 1.0)
      throw Error("invalid_config", "lambda must lie in (0,1]");
    if (decision_rule.beta0 < 0.0 || decision_rule.beta0 > 1.0)
      throw Error("invalid_config", "beta0 must lie in [0,1]");
  }
  if (decision_rule.kind == DecisionRuleSpec::Kind::Conditional &&
      (decision_rule.threshold <= 0.0 || decision_rule.threshold >= 1.0))
    throw Error("invalid_config", "confidence threshold must lie in (0,1)");
  if (plateau && plateau->window < 1)
    throw Error("invalid_config", "plateau window must be >= 1");
  for (const ExpertSpec& spec : experts)
    if (spec.n_scenarios < 1)
      throw Error("invalid_config", "scenario count must be >= 1");
}

std::uint64_t Dataset::fingerprint() const {
  std::string buffer;
  char scratch[32];
  for (const DatasetRow& row : rows) {
    for (double v : row.features.values) {
      std::snprintf(scratch, sizeof(scratch), "%.17g,", v);
      buffer += scratch;
    }
    buffer += '|';
    for (double v : row.target) {
      std::snprintf(scratch, sizeof(scratch), "%.17g,", v);
      buffer += scratch;
    }
    buffer += '\n';
  }
  return fnv1a_bytes(buffer);
}

std::vector<LabeledExample> Dataset::examples() const {
  std::vector<LabeledExample> out;
  out.reserve(rows.size());
  for (const DatasetRow& row : rows)
    out.push_back(LabeledExample{row.features, row.target});
  return out;
}

void write_dataset_jsonl(std::ostream& out, const Dataset& dataset) {
  for (const DatasetRow& row : dataset.rows) {
    json j{{"iteration", row.meta.iteration},
           {"episode", row.meta.episode},
           {"epoch", row.meta.epoch},
           {"expert", to_string(row.meta.expert)},
           {"features", row.features.values},
           {"target", row.target},
           {"stats",
            {{"wall_time", row.meta.stats.wall_time},
             {"gap", row.meta.stats.gap},
             {"n_sub_solves", row.meta.stats.n_sub_solves},
             {"reached_limit", row.meta.stats.reached_limit}}}};
    out << j.dump() << '\n';
  }
}

Dataset read_dataset_jsonl(std::istream& in) {
  Dataset dataset;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    DatasetRow row;
    row.meta.iteration = j.at("iteration").get<int>();
    row.meta.episode = j.at("episode").get<int>();
    row.meta.epoch = j.at("epoch").get<int>();
    row.meta.expert = expert_kind_from_string(j.at("expert").get<std::string>());
    row.features.values = j.at("features").get<std::vector<double>>();
    row.target = j.at("target").get<std::vector<double>>();
    const json& stats = j.at("stats");
    row.meta.stats.wall_time = stats.at("wall_time").get<double>();
    row.meta.stats.gap = stats.at("gap").get<double>();
    row.meta.stats.n_sub_solves = stats.at("n_sub_solves").get<int>();
    row.meta.stats.reached_limit = stats.at("reached_limit").get<bool>();
    dataset.rows.push_back(std::move(row));
  }
  return dataset;
}

double beta_schedule(int iteration, double lambda, double beta0) {
  if (iteration < 1)
    throw Error("invalid_config", "iterations are numbered from 1");
  return std::pow(lambda, iteration - 1) * beta0;
}

Action decision_rule(const DecisionRuleSpec& rule, const SystemState& state,
                     const std::optional<ExpertLabel>& expert_label,
                     const PolicyParams& policy, double beta_i,
                     const CostParams& params, RngStream& rng) {
  auto policy_action = [&] {
    const std::vector<double> probs =
        policy_forward(policy, extract_features(state, params));
    return select_action(probs, feasibility_mask(state, params),
                         SelectMode::Greedy, rng);
  };

  switch (rule.kind) {
    case DecisionRuleSpec::Kind::Total:
      if (!expert_label)
        throw Error("missing_label", "total control requires an expert label");
      return expert_label->executed_action();
    case DecisionRuleSpec::Kind::Vanilla: {
      const double z = rng.uniform();
      if (expert_label && z <= beta_i) return expert_label->executed_action();
      return policy_action();
    }
    case DecisionRuleSpec::Kind::Conditional: {
      const std::vector<double> probs =
          policy_forward(policy, extract_features(state, params));
      const std::vector<std::uint8_t> mask = feasibility_mask(state, params);
      double best = 0.0;
      for (std::size_t a = 0; a < probs.size(); ++a)
        if (mask[a]) best = std::max(best, probs[a]);
      if (best >= rule.threshold || !expert_label)
        return select_action(probs, mask, SelectMode::Greedy, rng);
      return expert_label->executed_action();
    }
  }
  return Action{0};
}

bool stop_condition(int completed, const DaggerConfig& config,
                    const std::vector<IterationRecord>& records) {
  if (completed >= config.iterations) return true;
  if (config.plateau && static_cast<int>(records.size()) > config.plateau->window) {
    const int w = config.plateau->window;
    double best_before = kInfinity;
    for (std::size_t i = 0; i + w < records.size(); ++i)
      best_before = std::min(best_before, records[i].eval_cost);
    double best_recent = kInfinity;
    for (std::size_t i = records.size() - w; i < records.size(); ++i)
      best_recent = std::min(best_recent, records[i].eval_cost);
    if (best_recent >= best_before - 1e-9) return true;
  }
  return false;
}

namespace {

struct EpisodeHarvest {
  std::vector<DatasetRow> rows;
  double expert_seconds = 0.0;
  int failures = 0;
};

// Full-information labels are computed once per episode and reused while
// the executed trajectory still follows them; a deviation (a Vanilla
// policy action, say) forces fresh solves from then on.
struct HindsightCache {
  bool available = false;
  bool on_path = true;
  std::vector<Action> labels;
};

ExpertLabel query_expert(const ExpertSpec& spec, const SystemState& state,
                         const EpisodeRealization& episode,
                         const CostParams& params, const GenConfig& gen,
                         const SolveLimits& kappa, HindsightCache& cache,
                         RngStream& rng) {
  switch (spec.kind) {
    case ExpertKind::Myopic:
      return myopic_action(state, params, rng);
    case ExpertKind::Deterministic: {
      const EpisodeContext context = EpisodeContext::sampling(state, params, gen);
      return deterministic_action(state, context, params, kappa, rng);
    }
    case ExpertKind::FullInformation: {
      const int k = state.epoch;
      if (cache.available && cache.on_path)
        return ExpertLabel::hard(cache.labels[k]);
      const EpisodeContext context = EpisodeContext::hindsight(
          state, params,
          std::vector<Patient>(episode.patients.begin() + k + 1,
                               episode.patients.end()));
      return full_information_action(state, context, params, kappa);
    }
    case ExpertKind::TwoStage: {
      const EpisodeContext context = EpisodeContext::sampling(state, params, gen);
      return two_stage_action(state, context, spec.n_scenarios, params, kappa, rng);
    }
    case ExpertKind::AggregatedDeterministic: {
      const EpisodeContext context = EpisodeContext::sampling(state, params, gen);
      return aggregated_deterministic(state, context, spec.n_scenarios, params,
                                      kappa, rng);
    }
  }
  throw Error("invalid_config", "unhandled expert kind");
}

EpisodeHarvest collect_episode(const DaggerConfig& config, const GenConfig& gen,
                               const CostParams& params,
                               const PolicyParams& policy, int iteration,
                               int episode_index, double beta_i,
                               std::uint64_t master_seed) {
  EpisodeHarvest harvest;
  RngStream episode_rng(master_seed, "train-episode",
                        static_cast<std::uint64_t>(iteration),
                        static_cast<std::uint64_t>(episode_index));
  const EpisodeRealization episode = sample_episode(gen, episode_rng);

  HindsightCache cache;
  const bool uses_hindsight =
      std::any_of(config.experts.begin(), config.experts.end(),
                  [](const ExpertSpec& s) {
                    return s.kind == ExpertKind::FullInformation;
                  });
  if (uses_hindsight) {
    const FullInfoLabels labels =
        full_information_labels(episode, params, config.kappa);
    cache.available = labels.optimal;
    cache.labels = labels.actions;
    harvest.expert_seconds += labels.solution.stats.wall_time;
  }

  SystemState state = initial_state(episode, params);
  for (int k = 0; k < episode.length(); ++k) {
    const std::uint64_t ik = static_cast<std::uint64_t>(iteration);
    const std::uint64_t hk = static_cast<std::uint64_t>(episode_index);
    const std::uint64_t kk = static_cast<std::uint64_t>(k);

    int calls = config.j_rule.constant;
    if (config.j_rule.skip_probability > 0.0) {
      RngStream skip_rng(master_seed, "fj", ik, hk, kk);
      if (skip_rng.bernoulli(config.j_rule.skip_probability)) calls = 0;
    }

    std::optional<ExpertLabel> label;
    std::vector<Action> votes;
    ExpertCallStats merged_stats;
    ExpertKind label_kind = config.experts.front().kind;
    for (int j = 1; j <= calls; ++j) {
      const ExpertSpec& spec =
          config.experts[(j - 1) % config.experts.size()];
      RngStream expert_rng(master_seed, "expert", ik, hk, kk,
                           static_cast<std::uint64_t>(j));
      try {
        ExpertLabel answer = query_expert(spec, state, episode, params, gen,
                                          config.kappa, cache, expert_rng);
        merged_stats.wall_time += answer.stats.wall_time;
        merged_stats.gap = std::max(merged_stats.gap, answer.stats.gap);
        merged_stats.n_sub_solves += answer.stats.n_sub_solves;
        merged_stats.reached_limit |= answer.stats.reached_limit;
        label_kind = spec.kind;
        if (calls == 1) {
          answer.stats = merged_stats;
          label = std::move(answer);
        } else {
          votes.push_back(answer.executed_action());
        }
      } catch (const Error&) {
        harvest.failures += 1;
      }
    }
    if (!votes.empty())
      label = ExpertLabel::soft(aggregate_frequency(votes, params.physicians),
                                merged_stats);
    harvest.expert_seconds += merged_stats.wall_time;

    if (label) {
      DatasetRow row;
      row.features = extract_features(state, params);
      row.target = label->target_distribution(params.physicians);
      row.meta = RowMeta{iteration, episode_index, k, label_kind, label->stats};
      harvest.rows.push_back(std::move(row));
    }

    RngStream rule_rng(master_seed, "dr", ik, hk, kk);
    const Action action = decision_rule(config.decision_rule, state, label,
                                        policy, beta_i, params, rule_rng);
    if (cache.available && cache.on_path && action != cache.labels[k])
      cache.on_path = false;

    if (k + 1 < episode.length())
      state = transition(state, action, episode.patients[k + 1], params);
  }
  return harvest;
}

}  // namespace

DaggerResult run_dagger(const DaggerConfig& config, const GenConfig& gen,
                        const CostParams& params, const TrainConfig& train_config,
                        const EvalSpec& eval, std::uint64_t master_seed) {
  config.validate();
  gen.validate();
  params.validate();
  train_config.validate();

  DaggerResult result;
  PolicyParams current = config.initial_policy_path.empty()
                             ? uniform_policy(params.physicians)
                             : load_policy_artifact(config.initial_policy_path).params;

  std::vector<EpisodeRealization> eval_episodes;
  for (int e = 0; e < eval.n_episodes; ++e) {
    RngStream rng(eval.seed_base, "eval-episode", static_cast<std::uint64_t>(e));
    eval_episodes.push_back(sample_episode(gen, rng));
  }

  for (int iteration = 1;; ++iteration) {
    const double beta_i =
        config.decision_rule.kind == DecisionRuleSpec::Kind::Vanilla
            ? beta_schedule(iteration, config.decision_rule.lambda,
                            config.decision_rule.beta0)
            : 0.0;

    std::vector<EpisodeHarvest> harvests(config.episodes_per_iteration);
    parallel_for(config.episodes_per_iteration, [&](int h) {
      harvests[h] = collect_episode(config, gen, params, current, iteration, h,
                                    beta_i, master_seed);
    });

    IterationRecord record;
    record.iteration = iteration;
    record.beta_used = beta_i;
    for (EpisodeHarvest& harvest : harvests) {
      record.expert_time += harvest.expert_seconds;
      result.expert_failures += harvest.failures;
      for (DatasetRow& row : harvest.rows)
        result.dataset.rows.push_back(std::move(row));
    }
    record.dataset_size = static_cast<long long>(result.dataset.size());

    if (result.dataset.rows.empty())
      throw Error("invalid_dataset", "no expert labels were collected");

    TrainConfig iteration_train = train_config;
    const PolicyParams* warm = nullptr;
    if (config.warm_start && iteration > 1) {
      iteration_train.epochs = config.warm_start_epochs;
      warm = &current;
    }
    TrainResult trained =
        train(result.dataset.examples(), iteration_train, warm);
    current = std::move(trained.params);
    record.train_loss =
        trained.epoch_losses.empty() ? 0.0 : trained.epoch_losses.back();

    if (!eval_episodes.empty()) {
      std::vector<double> costs(eval_episodes.size());
      parallel_for(static_cast<int>(eval_episodes.size()), [&](int e) {
        costs[e] = simulate_policy(current, eval_episodes[e], params).total_cost;
      });
      double total = 0.0;
      for (double c : costs) total += c;
      record.eval_cost = total / static_cast<double>(costs.size());
    }

    result.policies.push_back(current);
    result.records.push_back(record);
    if (stop_condition(iteration, config, result.records)) break;
  }
  return result;
}

}  // namespace ppa
