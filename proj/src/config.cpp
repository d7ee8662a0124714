#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ppa/harness.hpp"

// Config file parsing and snapshotting. The schema is strict: every key
// must be known, sections must be objects, and the cross-field invariants
// are re-checked by each module's validate().

namespace ppa {

using nlohmann::json;

namespace {

void expect_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& section) {
  if (!j.is_object())
    throw Error("invalid_config", "section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw Error("invalid_config",
                  "unknown key '" + key + "' in section '" + section + "'");
}

std::pair<double, double> parse_pair(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2)
    throw Error("invalid_config", what + " must be a [a, b] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

GenConfig parse_gen(const json& j) {
  expect_keys(j, {"mu_k", "sigma_k", "p_class1", "beta_params",
                  "lognormal_params", "physician_weights", "alpha",
                  "eligibility_size_range", "physicians"},
              "gen");
  GenConfig gen;
  gen.mu_k = j.at("mu_k").get<double>();
  gen.sigma_k = j.at("sigma_k").get<double>();
  gen.p_class1 = j.at("p_class1").get<double>();
  if (j.contains("beta_params")) {
    expect_keys(j.at("beta_params"), {"class1", "class2"}, "gen.beta_params");
    gen.beta_params[0] = parse_pair(j.at("beta_params").at("class1"), "beta class1");
    gen.beta_params[1] = parse_pair(j.at("beta_params").at("class2"), "beta class2");
  }
  if (j.contains("lognormal_params")) {
    expect_keys(j.at("lognormal_params"), {"class1", "class2"},
                "gen.lognormal_params");
    gen.lognormal_params[0] =
        parse_pair(j.at("lognormal_params").at("class1"), "lognormal class1");
    gen.lognormal_params[1] =
        parse_pair(j.at("lognormal_params").at("class2"), "lognormal class2");
  }
  gen.physician_weights = j.at("physician_weights").get<std::vector<double>>();
  gen.alpha = j.at("alpha").get<double>();
  const auto range = parse_pair(j.at("eligibility_size_range"), "eligibility range");
  gen.eligibility_min = static_cast<int>(range.first);
  gen.eligibility_max = static_cast<int>(range.second);
  gen.physicians = j.at("physicians").get<int>();
  gen.validate();
  return gen;
}

CostParams parse_costs(const json& j) {
  expect_keys(j, {"reject", "pref_ratio", "session_minutes", "appointment_caps"},
              "costs");
  CostParams costs;
  const auto reject = parse_pair(j.at("reject"), "reject costs");
  costs.reject_cost = {reject.first, reject.second};
  const double ratio = j.at("pref_ratio").get<double>();
  if (ratio <= 0.0 || ratio >= 1.0)
    throw Error("invalid_config", "pref_ratio must lie in (0,1)");
  costs.prefer_cost = {ratio * reject.first, ratio * reject.second};
  costs.session_minutes = j.at("session_minutes").get<double>();
  costs.appointment_caps = j.at("appointment_caps").get<std::vector<int>>();
  costs.physicians = static_cast<int>(costs.appointment_caps.size());
  costs.validate();
  return costs;
}

std::pair<ExpertSpec, SolveLimits> parse_expert(const json& j) {
  expect_keys(j, {"kind", "n_scenarios", "time_limit", "gap_limit", "node_limit"},
              "expert");
  ExpertSpec spec;
  spec.kind = expert_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("n_scenarios")) spec.n_scenarios = j.at("n_scenarios").get<int>();
  if (spec.n_scenarios < 1)
    throw Error("invalid_config", "n_scenarios must be >= 1");
  SolveLimits kappa;
  if (j.contains("time_limit") && !j.at("time_limit").is_null())
    kappa.time_limit = j.at("time_limit").get<double>();
  if (j.contains("gap_limit") && !j.at("gap_limit").is_null())
    kappa.gap_limit = j.at("gap_limit").get<double>();
  if (j.contains("node_limit") && !j.at("node_limit").is_null())
    kappa.node_limit = j.at("node_limit").get<long long>();
  return {spec, kappa};
}

DaggerConfig parse_dagger(const json& j) {
  expect_keys(j, {"iterations", "episodes_per_iteration", "j_constant",
                  "skip_probability", "decision_rule", "lambda", "beta0",
                  "threshold", "initial_policy", "warm_start",
                  "warm_start_epochs", "plateau_window"},
              "dagger");
  DaggerConfig dagger;
  dagger.iterations = j.at("iterations").get<int>();
  dagger.episodes_per_iteration = j.at("episodes_per_iteration").get<int>();
  if (j.contains("j_constant")) dagger.j_rule.constant = j.at("j_constant").get<int>();
  if (j.contains("skip_probability"))
    dagger.j_rule.skip_probability = j.at("skip_probability").get<double>();
  const std::string rule = j.at("decision_rule").get<std::string>();
  if (rule == "total") dagger.decision_rule.kind = DecisionRuleSpec::Kind::Total;
  else if (rule == "vanilla") dagger.decision_rule.kind = DecisionRuleSpec::Kind::Vanilla;
  else if (rule == "conditional")
    dagger.decision_rule.kind = DecisionRuleSpec::Kind::Conditional;
  else throw Error("invalid_config", "unknown decision rule: " + rule);
  if (j.contains("lambda")) dagger.decision_rule.lambda = j.at("lambda").get<double>();
  if (j.contains("beta0")) dagger.decision_rule.beta0 = j.at("beta0").get<double>();
  if (j.contains("threshold"))
    dagger.decision_rule.threshold = j.at("threshold").get<double>();
  if (j.contains("initial_policy"))
    dagger.initial_policy_path = j.at("initial_policy").get<std::string>();
  if (j.contains("warm_start")) dagger.warm_start = j.at("warm_start").get<bool>();
  if (j.contains("warm_start_epochs"))
    dagger.warm_start_epochs = j.at("warm_start_epochs").get<int>();
  if (j.contains("plateau_window")) {
    const int window = j.at("plateau_window").get<int>();
    if (window > 0) dagger.plateau = PlateauRule{window};
  }
  return dagger;
}

TrainConfig parse_train(const json& j) {
  expect_keys(j, {"learning_rate", "epochs", "batch_size", "seed", "l2"}, "train");
  TrainConfig train;
  train.learning_rate = j.at("learning_rate").get<double>();
  train.epochs = j.at("epochs").get<int>();
  train.batch_size = j.at("batch_size").get<int>();
  if (j.contains("seed")) train.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("l2")) train.l2 = j.at("l2").get<double>();
  train.validate();
  return train;
}

EvalSpec parse_eval(const json& j) {
  expect_keys(j, {"n_test_episodes", "test_seed_base"}, "eval");
  EvalSpec eval;
  eval.n_episodes = j.at("n_test_episodes").get<int>();
  eval.seed_base = j.at("test_seed_base").get<std::uint64_t>();
  if (eval.n_episodes < 0)
    throw Error("invalid_config", "n_test_episodes must be non-negative");
  return eval;
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("invalid_config", std::string("config is not valid JSON: ") + e.what());
  }
  expect_keys(j, {"gen", "costs", "expert", "dagger", "train", "eval",
                  "master_seed"},
              "<top-level>");

  RunConfig config;
  try {
    config.gen = parse_gen(j.at("gen"));
    config.costs = parse_costs(j.at("costs"));
    auto [expert, kappa] = parse_expert(j.at("expert"));
    config.expert = expert;
    config.kappa = kappa;
    config.dagger = parse_dagger(j.at("dagger"));
    config.dagger.experts = {config.expert};
    config.dagger.kappa = config.kappa;
    config.train = parse_train(j.at("train"));
    config.eval = parse_eval(j.at("eval"));
    if (j.contains("master_seed"))
      config.master_seed = j.at("master_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error("invalid_config", e.what());
  }
  config.dagger.validate();

  if (config.gen.physicians != config.costs.physicians)
    throw Error("invalid_config",
                "gen.physicians and the appointment cap vector disagree");
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return run_config_from_json(buffer.str());
}

std::string run_config_to_json(const RunConfig& config) {
  json j;
  j["gen"] = {
      {"mu_k", config.gen.mu_k},
      {"sigma_k", config.gen.sigma_k},
      {"p_class1", config.gen.p_class1},
      {"beta_params",
       {{"class1", {config.gen.beta_params[0].first, config.gen.beta_params[0].second}},
        {"class2", {config.gen.beta_params[1].first, config.gen.beta_params[1].second}}}},
      {"lognormal_params",
       {{"class1",
         {config.gen.lognormal_params[0].first, config.gen.lognormal_params[0].second}},
        {"class2",
         {config.gen.lognormal_params[1].first, config.gen.lognormal_params[1].second}}}},
      {"physician_weights", config.gen.physician_weights},
      {"alpha", config.gen.alpha},
      {"eligibility_size_range",
       {config.gen.eligibility_min, config.gen.eligibility_max}},
      {"physicians", config.gen.physicians}};
  j["costs"] = {{"reject", {config.costs.reject_cost[0], config.costs.reject_cost[1]}},
                {"pref_ratio",
                 config.costs.prefer_cost[0] / config.costs.reject_cost[0]},
                {"session_minutes", config.costs.session_minutes},
                {"appointment_caps", config.costs.appointment_caps}};
  j["expert"] = {{"kind", to_string(config.expert.kind)},
                 {"n_scenarios", config.expert.n_scenarios}};
  if (config.kappa.time_limit) j["expert"]["time_limit"] = *config.kappa.time_limit;
  if (config.kappa.gap_limit) j["expert"]["gap_limit"] = *config.kappa.gap_limit;
  if (config.kappa.node_limit) j["expert"]["node_limit"] = *config.kappa.node_limit;
  const char* rule_name =
      config.dagger.decision_rule.kind == DecisionRuleSpec::Kind::Total
          ? "total"
          : config.dagger.decision_rule.kind == DecisionRuleSpec::Kind::Vanilla
                ? "vanilla"
                : "conditional";
  j["dagger"] = {{"iterations", config.dagger.iterations},
                 {"episodes_per_iteration", config.dagger.episodes_per_iteration},
                 {"j_constant", config.dagger.j_rule.constant},
                 {"skip_probability", config.dagger.j_rule.skip_probability},
                 {"decision_rule", rule_name},
                 {"lambda", config.dagger.decision_rule.lambda},
                 {"beta0", config.dagger.decision_rule.beta0},
                 {"threshold", config.dagger.decision_rule.threshold},
                 {"initial_policy", config.dagger.initial_policy_path},
                 {"warm_start", config.dagger.warm_start},
                 {"warm_start_epochs", config.dagger.warm_start_epochs},
                 {"plateau_window",
                  config.dagger.plateau ? config.dagger.plateau->window : 0}};
  j["train"] = {{"learning_rate", config.train.learning_rate},
                {"epochs", config.train.epochs},
                {"batch_size", config.train.batch_size},
                {"seed", config.train.seed},
                {"l2", config.train.l2}};
  j["eval"] = {{"n_test_episodes", config.eval.n_episodes},
               {"test_seed_base", config.eval.seed_base}};
  j["master_seed"] = config.master_seed;
  return j.dump(2);
}

std::uint64_t config_hash(const RunConfig& config) {
  return fnv1a_bytes(run_config_to_json(config));
}

}  // namespace ppa
