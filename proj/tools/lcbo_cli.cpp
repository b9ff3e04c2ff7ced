// Experiment runner CLI: `run` executes a benchmark study and writes
// per-seed trace CSVs plus the aggregate, `aggregate` recomputes the
// aggregate from existing traces, `validate-config` checks a config file.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "lcbo/harness.hpp"

namespace {

lcbo::ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw lcbo::ConfigError("cannot open config file " + path);
  return lcbo::parse_experiment_config(in);
}

int run_command(const CLI::App& cmd, const std::string& config_path, std::string problem,
                std::string method, int dim, std::uint64_t problem_seed, int budget, int reps,
                std::uint64_t seed, std::string out_dir, bool plots, int jobs,
                const std::string& truss_file) {
  lcbo::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);

  if (cmd.count("--problem")) cfg.problem = problem;
  if (cmd.count("--method")) {
    if (method == "lcbo") cfg.method = lcbo::Method::Lcbo;
    else if (method == "random_search") cfg.method = lcbo::Method::RandomSearch;
    else throw lcbo::ConfigError("unknown method '" + method + "'");
  }
  if (cmd.count("--dim")) cfg.dim = dim;
  if (cmd.count("--problem-seed")) cfg.problem_seed = problem_seed;
  if (cmd.count("--budget")) cfg.budget = budget;
  if (cmd.count("--reps")) cfg.repetitions = reps;
  if (cmd.count("--seed")) cfg.base_seed = seed;
  if (cmd.count("--out")) cfg.out_dir = out_dir;
  if (cmd.count("--plots")) cfg.plots = plots;
  if (cmd.count("--jobs")) cfg.jobs = jobs;
  if (cmd.count("--truss-file")) cfg.truss_file = truss_file;

  cfg.validate();
  const auto result = lcbo::run_experiment(cfg);
  std::cout << "wrote " << result.traces.size() << " trace files and aggregate.csv to "
            << cfg.out_dir << "\n";
  return 0;
}

int aggregate_command(const std::string& dir, bool plots) {
  std::vector<std::vector<lcbo::TraceRow>> traces;
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("trace_seed", 0) == 0 && entry.path().extension() == ".csv")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw lcbo::ConfigError("no trace_seed*.csv files in " + dir);
  for (const auto& f : files) traces.push_back(lcbo::read_trace_csv(f));
  const auto agg = lcbo::aggregate_traces(traces);
  lcbo::write_aggregate_csv(dir + "/aggregate.csv", agg);
  if (plots) lcbo::write_convergence_svg(dir + "/convergence.svg", agg);
  std::cout << "aggregated " << files.size() << " traces into " << dir << "/aggregate.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LCBO benchmark harness"};
  app.require_subcommand(1);

  std::string config_path, problem, method, out_dir, truss_file, agg_dir;
  int dim = 25, budget = 1000, reps = 10, jobs = 1;
  std::uint64_t seed = 0, problem_seed = 0;
  bool plots = false;

  auto* run_cmd = app.add_subcommand("run", "run an experiment");
  run_cmd->add_option("--config", config_path, "config file (key = value lines)");
  run_cmd->add_option("--problem", problem, "toy_circle | synthetic | truss | beam");
  run_cmd->add_option("--method", method, "lcbo | random_search");
  run_cmd->add_option("--dim", dim, "synthetic problem dimension");
  run_cmd->add_option("--problem-seed", problem_seed, "synthetic instance seed");
  run_cmd->add_option("--budget", budget, "evaluation budget");
  run_cmd->add_option("--reps", reps, "number of repetitions");
  run_cmd->add_option("--seed", seed, "base seed; repetition r uses seed + r");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_flag("--plots", plots, "also render convergence.svg");
  run_cmd->add_option("--jobs", jobs, "parallel repetitions");
  run_cmd->add_option("--truss-file", truss_file, "truss geometry file");

  auto* agg_cmd = app.add_subcommand("aggregate", "re-aggregate existing traces");
  agg_cmd->add_option("--out", agg_dir, "directory with trace_seed*.csv files")->required();
  agg_cmd->add_flag("--plots", plots, "also render convergence.svg");

  std::string validate_path;
  auto* val_cmd = app.add_subcommand("validate-config", "check a config file");
  val_cmd->add_option("--config", validate_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed())
      return run_command(*run_cmd, config_path, problem, method, dim, problem_seed, budget, reps,
                         seed, out_dir, plots, jobs, truss_file);
    if (agg_cmd->parsed()) return aggregate_command(agg_dir, plots);
    if (val_cmd->parsed()) {
      const auto cfg = load_config_file(validate_path);
      cfg.validate();
      lcbo::make_problem(cfg);  // resolve the problem selector too
      std::cout << "config ok\n";
      return 0;
    }
  } catch (const lcbo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
