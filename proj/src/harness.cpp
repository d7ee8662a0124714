#include "ppa/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ppa/parallel.hpp"

namespace ppa {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct EpisodeOutcome {
  RolloutResult rollout;
  double decision_seconds = 0.0;
  int decisions = 0;
};

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

EpisodeOutcome run_expert_as_policy(const PolicyRef& policy,
                                    const EpisodeRealization& episode,
                                    const RunConfig& config, int episode_index) {
  const CostParams& params = config.costs;
  SystemState state = initial_state(episode, params);
  std::vector<Action> actions;
  actions.reserve(episode.patients.size());
  EpisodeOutcome outcome;
  for (int k = 0; k < episode.length(); ++k) {
    RngStream rng(config.eval.seed_base, "eval-decision",
                  static_cast<std::uint64_t>(episode_index),
                  static_cast<std::uint64_t>(k));
    const double tick = now_seconds();
    Action action{0};
    if (policy.kind == PolicyRef::Kind::Greedy) {
      action = myopic_action(state, params, rng).action;
    } else {
      const EpisodeContext context =
          EpisodeContext::sampling(state, params, config.gen);
      action = two_stage_action(state, context, policy.n_scenarios, params,
                                config.kappa, rng)
                   .action;
    }
    outcome.decision_seconds += now_seconds() - tick;
    outcome.decisions += 1;
    actions.push_back(action);
    if (k + 1 < episode.length())
      state = transition(state, action, episode.patients[k + 1], params);
  }
  outcome.rollout = rollout_cost(episode, actions, params);
  return outcome;
}

EpisodeOutcome run_one_episode(const PolicyRef& policy,
                               const EpisodeRealization& episode,
                               const RunConfig& config, int episode_index) {
  switch (policy.kind) {
    case PolicyRef::Kind::Greedy:
    case PolicyRef::Kind::TwoStage:
      return run_expert_as_policy(policy, episode, config, episode_index);
    case PolicyRef::Kind::Hindsight: {
      EpisodeOutcome outcome;
      const double tick = now_seconds();
      const FullInfoLabels labels =
          full_information_labels(episode, config.costs, config.kappa);
      outcome.decision_seconds = now_seconds() - tick;
      outcome.decisions = episode.length();
      outcome.rollout = rollout_cost(episode, labels.actions, config.costs);
      return outcome;
    }
    case PolicyRef::Kind::Learned: {
      if (!policy.model)
        throw Error("invalid_policy", "missing learned policy parameters");
      if (policy.model->input != feature_length(config.costs.physicians))
        throw Error("artifact_version",
                    "policy feature layout does not match this configuration");
      EpisodeOutcome outcome;
      const double tick = now_seconds();
      outcome.rollout = simulate_policy(*policy.model, episode, config.costs);
      outcome.decision_seconds = now_seconds() - tick;
      outcome.decisions = episode.length();
      return outcome;
    }
  }
  throw Error("invalid_policy", "unhandled policy kind");
}

}  // namespace

MetricsRow evaluate_policy(const PolicyRef& policy, const RunConfig& config,
                           const std::string& policy_id) {
  if (config.eval.n_episodes < 1)
    throw Error("invalid_config", "evaluation needs at least one episode");

  std::vector<EpisodeOutcome> outcomes(config.eval.n_episodes);
  parallel_for(config.eval.n_episodes, [&](int e) {
    RngStream rng(config.eval.seed_base, "eval-episode",
                  static_cast<std::uint64_t>(e));
    const EpisodeRealization episode = sample_episode(config.gen, rng);
    outcomes[e] = run_one_episode(policy, episode, config, e);
  });

  MetricsRow row;
  row.policy_id = policy_id;
  double seconds = 0.0;
  long long decisions = 0;
  for (const EpisodeOutcome& outcome : outcomes) {
    row.avg_cost += outcome.rollout.total_cost;
    row.p1_rejected += outcome.rollout.metrics.p1_rejected;
    row.p2_rejected += outcome.rollout.metrics.p2_rejected;
    row.undesirable += outcome.rollout.metrics.undesirable;
    seconds += outcome.decision_seconds;
    decisions += outcome.decisions;
  }
  const double n = static_cast<double>(config.eval.n_episodes);
  row.avg_cost /= n;
  row.p1_rejected /= n;
  row.p2_rejected /= n;
  row.undesirable /= n;
  row.avg_decision_time = decisions > 0 ? seconds / decisions : 0.0;
  return row;
}

std::vector<MetricsRow> run_baselines(const RunConfig& config) {
  std::vector<MetricsRow> rows;
  rows.push_back(evaluate_policy(PolicyRef::greedy(), config, "greedy"));
  rows.push_back(evaluate_policy(PolicyRef::two_stage(config.expert.n_scenarios),
                                 config, "two_stage"));
  rows.push_back(evaluate_policy(PolicyRef::hindsight(), config, "hindsight"));
  return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "policy,avg_cost,p1_rejected,p2_rejected,undesirable\n";
  char buf[160];
  for (const MetricsRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.2f,%.2f,%.2f,%.2f\n",
                  row.policy_id.c_str(), row.avg_cost, row.p1_rejected,
                  row.p2_rejected, row.undesirable);
    out << buf;
  }
}

void write_metrics_json(std::ostream& out, const std::vector<MetricsRow>& rows,
                        const RunConfig& config) {
  json entries = json::array();
  for (const MetricsRow& row : rows)
    entries.push_back({{"policy", row.policy_id},
                       {"avg_cost", row.avg_cost},
                       {"p1_rejected", row.p1_rejected},
                       {"p2_rejected", row.p2_rejected},
                       {"undesirable", row.undesirable},
                       {"avg_decision_time", row.avg_decision_time}});
  json j{{"metrics", entries},
         {"seed_audit",
          {{"test_seed_base", config.eval.seed_base},
           {"n_test_episodes", config.eval.n_episodes},
           {"episode_stream", "eval-episode"}}},
         {"config_hash", config_hash(config)}};
  out << j.dump(2) << '\n';
}

void write_records_csv(std::ostream& out,
                       const std::vector<IterationRecord>& records) {
  out << "iteration,dataset_size,train_loss,eval_cost,expert_time,beta\n";
  char buf[200];
  for (const IterationRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%lld,%.6f,%.6f,%.3f,%.6f\n", r.iteration,
                  r.dataset_size, r.train_loss, r.eval_cost, r.expert_time,
                  r.beta_used);
    out << buf;
  }
}

std::vector<IterationRecord> read_records_csv(std::istream& in) {
  std::vector<IterationRecord> records;
  std::string line;
  if (!std::getline(in, line))
    throw Error("bad_records", "records CSV is empty");
  if (line != "iteration,dataset_size,train_loss,eval_cost,expert_time,beta")
    throw Error("bad_records", "unexpected records CSV header: " + line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    IterationRecord r;
    if (std::sscanf(line.c_str(), "%d,%lld,%lf,%lf,%lf,%lf", &r.iteration,
                    &r.dataset_size, &r.train_loss, &r.eval_cost, &r.expert_time,
                    &r.beta_used) != 6)
      throw Error("bad_records", "cannot parse records row: " + line);
    records.push_back(r);
  }
  return records;
}

TrainOutcome run_training(const RunConfig& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream snapshot(fs::path(out_dir) / "config.json");
    if (!snapshot) throw Error("io_error", "cannot write config snapshot");
    snapshot << run_config_to_json(config) << '\n';
  }

  TrainOutcome outcome;
  outcome.result = run_dagger(config.dagger, config.gen, config.costs,
                              config.train, config.eval, config.master_seed);

  {
    std::ofstream data(fs::path(out_dir) / "dataset.jsonl");
    write_dataset_jsonl(data, outcome.result.dataset);
  }
  {
    std::ofstream records(fs::path(out_dir) / "records.csv");
    write_records_csv(records, outcome.result.records);
  }

  const std::uint64_t fingerprint = outcome.result.dataset.fingerprint();
  outcome.best_iteration = 1;
  for (std::size_t i = 0; i < outcome.result.policies.size(); ++i) {
    PolicyArtifact artifact;
    artifact.physicians = config.costs.physicians;
    artifact.params = outcome.result.policies[i];
    artifact.train_config = config.train;
    artifact.dataset_fingerprint = fingerprint;
    char name[64];
    std::snprintf(name, sizeof(name), "model_iter_%04zu.json", i + 1);
    save_policy_artifact((fs::path(out_dir) / name).string(), artifact);
    if (outcome.result.records[i].eval_cost <
        outcome.result.records[outcome.best_iteration - 1].eval_cost - 1e-12)
      outcome.best_iteration = static_cast<int>(i) + 1;
  }

  PolicyArtifact best;
  best.physicians = config.costs.physicians;
  best.params = outcome.result.policies[outcome.best_iteration - 1];
  best.train_config = config.train;
  best.dataset_fingerprint = fingerprint;
  save_policy_artifact((fs::path(out_dir) / "model.json").string(), best);
  return outcome;
}

// ---------------------------------------------------------------------------
// Instance and solution JSON

namespace {

json patient_to_json(const Patient& p) {
  return json{{"id", p.id},
              {"duration", p.duration},
              {"priority", p.priority},
              {"preferred", p.preferred},
              {"eligible", p.eligible},
              {"arrival_score", p.arrival_score}};
}

Patient patient_from_json(const json& j) {
  Patient p;
  p.id = j.at("id").get<int>();
  p.duration = j.at("duration").get<double>();
  p.priority = j.at("priority").get<int>();
  p.preferred = j.at("preferred").get<int>();
  p.eligible = j.at("eligible").get<std::vector<int>>();
  p.arrival_score = j.contains("arrival_score")
                        ? j.at("arrival_score").get<double>()
                        : 0.0;
  return p;
}

}  // namespace

PpaInstance instance_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("invalid_instance", std::string("not valid JSON: ") + e.what());
  }
  PpaInstance instance;
  try {
    const json& params = j.at("params");
    instance.params.reject_cost = {params.at("reject")[0].get<double>(),
                                   params.at("reject")[1].get<double>()};
    instance.params.prefer_cost = {params.at("prefer")[0].get<double>(),
                                   params.at("prefer")[1].get<double>()};
    instance.params.session_minutes = params.at("session_minutes").get<double>();
    instance.params.appointment_caps =
        params.at("appointment_caps").get<std::vector<int>>();
    instance.params.physicians =
        static_cast<int>(instance.params.appointment_caps.size());
    instance.params.validate();

    for (const json& patient : j.at("patients"))
      instance.patients.push_back(patient_from_json(patient));

    if (j.contains("residual")) {
      instance.residual.slots_left =
          j.at("residual").at("slots_left").get<std::vector<int>>();
      instance.residual.workload_left =
          j.at("residual").at("workload_left").get<std::vector<double>>();
      if (static_cast<int>(instance.residual.slots_left.size()) !=
              instance.params.physicians ||
          static_cast<int>(instance.residual.workload_left.size()) !=
              instance.params.physicians)
        throw Error("invalid_instance", "residual vectors have the wrong length");
    } else {
      instance.residual = ResidualCapacity::full(instance.params);
    }

    if (j.contains("scenarios"))
      for (const json& scenario : j.at("scenarios")) {
        std::vector<Patient> patients;
        for (const json& patient : scenario)
          patients.push_back(patient_from_json(patient));
        instance.scenarios.push_back(std::move(patients));
      }
  } catch (const json::exception& e) {
    throw Error("invalid_instance", e.what());
  }
  for (const Patient& p : instance.patients)
    p.validate(instance.params.physicians);
  for (const auto& scenario : instance.scenarios)
    for (const Patient& p : scenario) p.validate(instance.params.physicians);
  return instance;
}

PpaInstance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return instance_from_json(buffer.str());
}

std::string instance_to_json(const PpaInstance& instance) {
  json j;
  j["params"] = {{"reject", {instance.params.reject_cost[0],
                             instance.params.reject_cost[1]}},
                 {"prefer", {instance.params.prefer_cost[0],
                             instance.params.prefer_cost[1]}},
                 {"session_minutes", instance.params.session_minutes},
                 {"appointment_caps", instance.params.appointment_caps}};
  j["residual"] = {{"slots_left", instance.residual.slots_left},
                   {"workload_left", instance.residual.workload_left}};
  j["patients"] = json::array();
  for (const Patient& p : instance.patients) j["patients"].push_back(patient_to_json(p));
  if (!instance.scenarios.empty()) {
    j["scenarios"] = json::array();
    for (const auto& scenario : instance.scenarios) {
      json s = json::array();
      for (const Patient& p : scenario) s.push_back(patient_to_json(p));
      j["scenarios"].push_back(std::move(s));
    }
  }
  return j.dump(2);
}

MilpModel build_instance_model(const PpaInstance& instance) {
  if (instance.is_two_stage()) {
    if (instance.patients.size() != 1)
      throw Error("invalid_instance",
                  "a two-stage instance carries exactly one first-stage patient");
    ScenarioSet set;
    set.anchor_epoch = 0;
    set.anchor_score = instance.patients.front().arrival_score;
    for (const auto& scenario : instance.scenarios) {
      EpisodeRealization fragment;
      fragment.physician_count = instance.params.physicians;
      fragment.patients = scenario;
      set.scenarios.push_back(std::move(fragment));
    }
    return build_sppa_model(instance.patients.front(), set, instance.residual,
                            instance.params);
  }
  return build_ppa_model(instance.patients, instance.residual, instance.params);
}

std::string solution_to_json(const MipSolution& solution, const MilpModel& model,
                             const PpaInstance& instance) {
  json j;
  j["status"] = solution.status == SolveStatus::Optimal
                    ? "optimal"
                    : solution.status == SolveStatus::FeasibleWithinLimits
                          ? "feasible_within_limits"
                          : "infeasible";
  if (std::isfinite(solution.objective)) j["objective"] = solution.objective;
  if (std::isfinite(solution.best_bound)) j["best_bound"] = solution.best_bound;
  j["gap"] = std::isfinite(solution.gap) ? json(solution.gap) : json();
  j["stats"] = {{"wall_time", solution.stats.wall_time},
                {"nodes", solution.stats.nodes},
                {"simplex_iterations", solution.stats.simplex_iterations}};
  if (solution.status != SolveStatus::Infeasible && !solution.values.empty()) {
    json actions = json::array();
    if (instance.is_two_stage()) {
      actions.push_back(
          extract_action(model, solution.values, 0, instance.patients.front()).value);
    } else {
      for (std::size_t k = 0; k < instance.patients.size(); ++k)
        actions.push_back(extract_action(model, solution.values,
                                         static_cast<int>(k),
                                         instance.patients[k])
                              .value);
    }
    j["actions"] = std::move(actions);
  }
  return j.dump(2);
}

}  // namespace ppa
