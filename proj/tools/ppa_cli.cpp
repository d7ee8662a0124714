#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ppa/harness.hpp"
#include "ppa/mps.hpp"
#include "ppa/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int fail(const std::string& type, const std::string& message) {
  json j{{"error", {{"type", type}, {"message", message}}}};
  std::cerr << j.dump() << std::endl;
  return 1;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ppa::Error("io_error", "cannot open " + path + " for writing");
  out << text;
}

int cmd_gen(const std::string& config_path, int count, const std::string& out_dir,
            std::uint64_t seed) {
  const ppa::RunConfig config = ppa::load_run_config(config_path);
  fs::create_directories(out_dir);
  json manifest{{"seed", seed},
                {"config_hash", ppa::config_hash(config)},
                {"n_episodes", count},
                {"files", json::array()}};
  for (int i = 0; i < count; ++i) {
    ppa::RngStream rng(seed, "corpus-episode", static_cast<std::uint64_t>(i));
    const ppa::EpisodeRealization episode = ppa::sample_episode(config.gen, rng);
    char name[48];
    std::snprintf(name, sizeof(name), "episode_%05d.jsonl", i);
    ppa::save_episode_file((fs::path(out_dir) / name).string(), episode);
    manifest["files"].push_back(name);
  }
  write_text((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "wrote " << count << " episodes to " << out_dir << "\n";
  return 0;
}

int cmd_solve(const std::string& instance_path, const std::string& out_path,
              const ppa::SolveLimits& limits) {
  const ppa::PpaInstance instance = ppa::load_instance_file(instance_path);
  const ppa::MilpModel model = ppa::build_instance_model(instance);
  const ppa::MipSolution solution = ppa::solve_mip(model, limits);
  const std::string text = ppa::solution_to_json(solution, model, instance) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_text(out_path, text);
  return 0;
}

int cmd_export_mps(const std::string& instance_path, const std::string& out_path) {
  const ppa::PpaInstance instance = ppa::load_instance_file(instance_path);
  const ppa::MilpModel model = ppa::build_instance_model(instance);
  ppa::write_mps_file(out_path, model);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_baseline(const std::string& config_path, const std::string& csv_path,
                 const std::string& json_path) {
  const ppa::RunConfig config = ppa::load_run_config(config_path);
  const std::vector<ppa::MetricsRow> rows = ppa::run_baselines(config);
  std::ostringstream csv;
  ppa::write_metrics_csv(csv, rows);
  if (csv_path.empty())
    std::cout << csv.str();
  else
    write_text(csv_path, csv.str());
  if (!json_path.empty()) {
    std::ostringstream sidecar;
    ppa::write_metrics_json(sidecar, rows, config);
    write_text(json_path, sidecar.str());
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
  ppa::RunConfig config = ppa::load_run_config(config_path);
  if (seed) config.master_seed = *seed;
  const ppa::TrainOutcome outcome = ppa::run_training(config, out_dir);
  std::cout << "trained " << outcome.result.policies.size()
            << " iteration(s); best iteration " << outcome.best_iteration
            << " with held-out cost "
            << outcome.result.records[outcome.best_iteration - 1].eval_cost
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& model_path,
                 const std::string& csv_path, const std::string& json_path) {
  const ppa::RunConfig config = ppa::load_run_config(config_path);
  const ppa::PolicyArtifact artifact = ppa::load_policy_artifact(model_path);
  if (artifact.physicians != config.costs.physicians)
    throw ppa::Error("artifact_version",
                     "model was trained for a different physician count");
  const std::vector<ppa::MetricsRow> rows{ppa::evaluate_policy(
      ppa::PolicyRef::learned(artifact.params), config, "learned")};
  std::ostringstream csv;
  ppa::write_metrics_csv(csv, rows);
  if (csv_path.empty())
    std::cout << csv.str();
  else
    write_text(csv_path, csv.str());
  if (!json_path.empty()) {
    std::ostringstream sidecar;
    ppa::write_metrics_json(sidecar, rows, config);
    write_text(json_path, sidecar.str());
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs) {
  std::optional<std::uint64_t> expected_hash;
  std::printf("%-28s %10s %10s %12s %12s %10s\n", "run", "iters", "best_iter",
              "best_cost", "final_cost", "rows");
  for (const std::string& dir : run_dirs) {
    std::ifstream config_in(fs::path(dir) / "config.json");
    if (!config_in)
      throw ppa::Error("io_error", "missing config snapshot in " + dir);
    std::ostringstream buffer;
    buffer << config_in.rdbuf();
    const ppa::RunConfig config = ppa::run_config_from_json(buffer.str());
    const std::uint64_t hash = ppa::config_hash(config);
    if (expected_hash && hash != *expected_hash)
      throw ppa::Error("mixed_configs",
                       "run directories were produced by different configs; "
                       "refusing to aggregate");
    expected_hash = hash;

    std::ifstream records_in(fs::path(dir) / "records.csv");
    if (!records_in) throw ppa::Error("io_error", "missing records.csv in " + dir);
    const std::vector<ppa::IterationRecord> records =
        ppa::read_records_csv(records_in);
    if (records.empty()) throw ppa::Error("bad_records", "no iterations in " + dir);
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i)
      if (records[i].eval_cost < records[best].eval_cost) best = i;
    std::printf("%-28s %10zu %10d %12.2f %12.2f %10lld\n", dir.c_str(),
                records.size(), records[best].iteration,
                records[best].eval_cost, records.back().eval_cost,
                records.back().dataset_size);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physician-to-patient assignment workbench"};
  app.require_subcommand(1);

  int workers = 0;
  app.add_option("--workers", workers, "Worker threads (default: PPA_WORKERS or all cores)");

  std::string config_path, out_path, json_path, model_path, instance_path;
  int gen_count = 10;
  std::uint64_t gen_seed = 1;
  bool seed_set = false;
  std::uint64_t train_seed = 0;
  ppa::SolveLimits limits;
  double time_limit = 0.0;
  double gap_limit = 0.0;
  long long node_limit = 0;
  std::vector<std::string> run_dirs;

  CLI::App* gen = app.add_subcommand("gen", "Sample an episode corpus");
  gen->add_option("--config", config_path, "Run config file")->required();
  gen->add_option("--n", gen_count, "Number of episodes");
  gen->add_option("--out", out_path, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Corpus seed");

  CLI::App* solve = app.add_subcommand("solve", "Solve one instance JSON");
  solve->add_option("instance", instance_path, "Instance JSON file")->required();
  solve->add_option("--out", out_path, "Solution JSON path (default stdout)");
  solve->add_option("--time-limit", time_limit, "Seconds");
  solve->add_option("--gap-limit", gap_limit, "Relative gap");
  solve->add_option("--node-limit", node_limit, "Node budget");

  CLI::App* export_mps = app.add_subcommand("export-mps", "Write the model as MPS");
  export_mps->add_option("instance", instance_path, "Instance JSON file")->required();
  export_mps->add_option("--out", out_path, "MPS output path")->required();

  CLI::App* baseline = app.add_subcommand("baseline", "Evaluate the baseline policies");
  baseline->add_option("--config", config_path, "Run config file")->required();
  baseline->add_option("--out", out_path, "Metrics CSV path (default stdout)");
  baseline->add_option("--json", json_path, "Full-precision JSON sidecar");

  CLI::App* train = app.add_subcommand("train", "Run imitation learning");
  train->add_option("--config", config_path, "Run config file")->required();
  train->add_option("--out", out_path, "Run directory")->required();
  train->add_option("--seed", train_seed, "Master seed override")
      ->each([&seed_set](const std::string&) { seed_set = true; });

  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a model artifact");
  evaluate->add_option("--config", config_path, "Run config file")->required();
  evaluate->add_option("--model", model_path, "Model artifact JSON")->required();
  evaluate->add_option("--out", out_path, "Metrics CSV path (default stdout)");
  evaluate->add_option("--json", json_path, "Full-precision JSON sidecar");

  CLI::App* report = app.add_subcommand("report", "Summarize run directories");
  report->add_option("runs", run_dirs, "Run directories")->required();

  CLI11_PARSE(app, argc, argv);

  if (workers > 0) ppa::set_worker_count(workers);
  if (time_limit > 0.0) limits.time_limit = time_limit;
  if (gap_limit > 0.0) limits.gap_limit = gap_limit;
  if (node_limit > 0) limits.node_limit = node_limit;

  try {
    if (gen->parsed()) return cmd_gen(config_path, gen_count, out_path, gen_seed);
    if (solve->parsed()) return cmd_solve(instance_path, out_path, limits);
    if (export_mps->parsed()) return cmd_export_mps(instance_path, out_path);
    if (baseline->parsed()) return cmd_baseline(config_path, out_path, json_path);
    if (train->parsed())
      return cmd_train(config_path, out_path,
                       seed_set ? std::optional<std::uint64_t>(train_seed)
                                : std::nullopt);
    if (evaluate->parsed())
      return cmd_evaluate(config_path, model_path, out_path, json_path);
    if (report->parsed()) return cmd_report(run_dirs);
  } catch (const ppa::Error& e) {
    return fail(e.kind, e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return fail("usage", "no subcommand given");
}
