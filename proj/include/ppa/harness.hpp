#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ppa/core.hpp"
#include "ppa/dagger.hpp"
#include "ppa/generator.hpp"
#include "ppa/milp.hpp"
#include "ppa/policy.hpp"

namespace ppa {

/// Everything one experiment needs, mirroring the config file sections.
struct RunConfig {
  GenConfig gen;
  CostParams costs;
  ExpertSpec expert;       // the baseline / labeling expert
  SolveLimits kappa;       // expert stopping criteria
  DaggerConfig dagger;
  TrainConfig train;
  EvalSpec eval;
  std::uint64_t master_seed = 1;
};

/// Parses and schema-validates a config file; unknown keys are errors.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);
std::uint64_t config_hash(const RunConfig& config);

/// Table-style evaluation summary for one policy. Decision time is
/// reported separately from the deterministic metric columns.
struct MetricsRow {
  std::string policy_id;
  double avg_cost = 0.0;
  double p1_rejected = 0.0;
  double p2_rejected = 0.0;
  double undesirable = 0.0;
  double avg_decision_time = 0.0;
};

struct PolicyRef {
  enum class Kind { Greedy, TwoStage, Hindsight, Learned };
  Kind kind = Kind::Greedy;
  int n_scenarios = 10;
  const PolicyParams* model = nullptr;

  static PolicyRef greedy() { return {}; }
  static PolicyRef two_stage(int scenarios) {
    return PolicyRef{Kind::TwoStage, scenarios, nullptr};
  }
  static PolicyRef hindsight() { return PolicyRef{Kind::Hindsight, 0, nullptr}; }
  static PolicyRef learned(const PolicyParams& params) {
    return PolicyRef{Kind::Learned, 0, &params};
  }
};

/// Simulates the policy over the held-out episode block (identical
/// realizations for every policy under one config) and aggregates the
/// metric columns.
MetricsRow evaluate_policy(const PolicyRef& policy, const RunConfig& config,
                           const std::string& policy_id);

/// Greedy, two-stage and hindsight rows on the shared seed block.
std::vector<MetricsRow> run_baselines(const RunConfig& config);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_metrics_json(std::ostream& out, const std::vector<MetricsRow>& rows,
                        const RunConfig& config);

void write_records_csv(std::ostream& out,
                       const std::vector<IterationRecord>& records);
std::vector<IterationRecord> read_records_csv(std::istream& in);

struct TrainOutcome {
  DaggerResult result;
  int best_iteration = 0;  // 1-based, lowest held-out cost
};

/// Full training run: collects, trains, evaluates per iteration, and
/// writes the run directory (config snapshot, dataset, per-iteration
/// model artifacts, records CSV, best model).
TrainOutcome run_training(const RunConfig& config, const std::string& out_dir);

/// Static instance as consumed by the solve/export subcommands.
struct PpaInstance {
  std::vector<Patient> patients;
  ResidualCapacity residual;
  CostParams params;
  std::vector<std::vector<Patient>> scenarios;  // non-empty: two-stage

  bool is_two_stage() const { return !scenarios.empty(); }
};

PpaInstance instance_from_json(const std::string& text);
PpaInstance load_instance_file(const std::string& path);
std::string instance_to_json(const PpaInstance& instance);
MilpModel build_instance_model(const PpaInstance& instance);

std::string solution_to_json(const MipSolution& solution, const MilpModel& model,
                             const PpaInstance& instance);

}  // namespace ppa
