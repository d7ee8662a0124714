#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ppa/core.hpp"
#include "ppa/experts.hpp"
#include "ppa/generator.hpp"
#include "ppa/milp.hpp"
#include "ppa/policy.hpp"

namespace ppa {

enum class ExpertKind {
  Myopic,
  Deterministic,
  FullInformation,
  TwoStage,
  AggregatedDeterministic,
};

std::string to_string(ExpertKind kind);
ExpertKind expert_kind_from_string(const std::string& name);

struct ExpertSpec {
  ExpertKind kind = ExpertKind::TwoStage;
  int n_scenarios = 10;
};

/// F_j: skip labeling with probability skip_probability, otherwise make
/// `constant` expert calls at the state.
struct JRule {
  int constant = 1;
  double skip_probability = 0.0;
};

struct DecisionRuleSpec {
  enum class Kind { Total, Vanilla, Conditional };
  Kind kind = Kind::Vanilla;
  double lambda = 1.0;     // Vanilla decay
  double beta0 = 0.8;      // Vanilla initial expert probability
  double threshold = 0.8;  // Conditional confidence cut
};

struct PlateauRule {
  int window = 5;  // stop after this many iterations without improvement
};

struct DaggerConfig {
  int iterations = 1;              // I
  int episodes_per_iteration = 1;  // H
  JRule j_rule;
  std::vector<ExpertSpec> experts{ExpertSpec{}};  // F_e round-robin
  SolveLimits kappa;
  DecisionRuleSpec decision_rule;
  std::string initial_policy_path;  // empty: uniform zero-weight policy
  std::optional<PlateauRule> plateau;
  bool warm_start = true;
  int warm_start_epochs = 10;

  void validate() const;
};

struct RowMeta {
  int iteration = 0;
  int episode = 0;
  int epoch = 0;
  ExpertKind expert = ExpertKind::TwoStage;
  ExpertCallStats stats;
};

struct DatasetRow {
  FeatureVector features;
  std::vector<double> target;
  RowMeta meta;
};

/// Append-only pool of expert-labeled states, ordered by
/// (iteration, episode, epoch) regardless of worker count.
struct Dataset {
  std::vector<DatasetRow> rows;

  std::size_t size() const { return rows.size(); }
  /// Hash of features and targets only (no wall times), so identical
  /// runs produce identical fingerprints.
  std::uint64_t fingerprint() const;
  std::vector<LabeledExample> examples() const;
};

void write_dataset_jsonl(std::ostream& out, const Dataset& dataset);
Dataset read_dataset_jsonl(std::istream& in);

struct IterationRecord {
  int iteration = 0;
  long long dataset_size = 0;
  double train_loss = 0.0;
  double eval_cost = 0.0;
  double expert_time = 0.0;  // summed expert wall time this iteration
  double beta_used = 0.0;
};

/// beta_i = lambda^(i-1) * beta0 for iteration i >= 1.
double beta_schedule(int iteration, double lambda, double beta0);

/// Executes one decision: Total plays the expert, Vanilla plays the expert
/// with probability beta_i and the masked-greedy policy otherwise,
/// Conditional trusts the policy only above its confidence threshold.
Action decision_rule(const DecisionRuleSpec& rule, const SystemState& state,
                     const std::optional<ExpertLabel>& expert_label,
                     const PolicyParams& policy, double beta_i,
                     const CostParams& params, RngStream& rng);

/// True once iteration `completed` may be the last: the iteration budget
/// is spent, or the plateau rule sees no recent eval improvement.
bool stop_condition(int completed, const DaggerConfig& config,
                    const std::vector<IterationRecord>& records);

struct EvalSpec {
  int n_episodes = 0;  // 0 disables per-iteration evaluation
  std::uint64_t seed_base = 0;
};

struct DaggerResult {
  std::vector<PolicyParams> policies;  // pi_1 .. pi_I
  std::vector<IterationRecord> records;
  Dataset dataset;
  int expert_failures = 0;
};

DaggerResult run_dagger(const DaggerConfig& config, const GenConfig& gen,
                        const CostParams& params, const TrainConfig& train_config,
                        const EvalSpec& eval, std::uint64_t master_seed);

}  // namespace ppa
