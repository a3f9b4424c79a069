// Command-line benchmark driver: `run` executes an experiment config and
// writes a run-record CSV, `summarize` aggregates record CSVs across runs.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dop/bench.hpp"

int main(int argc, char** argv) {
  CLI::App app{"planning/learning benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string algo_override;
  std::string env_override;
  std::uint64_t seed_override = 0;
  std::string out_override;
  CLI::App* run = app.add_subcommand("run", "run one experiment and write its record CSV");
  run->add_option("--config", config_path, "experiment config file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* algo_opt = run->add_option("--algo", algo_override, "override the configured algorithm");
  auto* env_opt = run->add_option("--env", env_override, "override the configured environment");
  auto* seed_opt = run->add_option("--seed", seed_override, "override the configured master seed");
  auto* out_opt = run->add_option("--out", out_override, "override the configured output path");

  std::vector<std::string> inputs;
  std::string summary_out;
  CLI::App* summarize = app.add_subcommand("summarize", "aggregate record CSVs per algorithm/iteration");
  summarize->add_option("--in", inputs, "input record CSVs")->required()->expected(-1);
  summarize->add_option("--out", summary_out, "summary CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      dop::ExperimentConfig cfg = dop::load_config_file(config_path);
      if (algo_opt->count()) cfg.algorithm = algo_override;
      if (env_opt->count()) cfg.environment = env_override;
      if (seed_opt->count()) cfg.seed = seed_override;
      if (out_opt->count()) cfg.out = out_override;
      std::vector<dop::RunRecord> records = dop::run_experiment(cfg);
      std::cout << "wrote " << records.size() << " records to " << cfg.out << "\n";
    } else {
      std::string summary = dop::summarize_files(inputs);
      std::ofstream out(summary_out);
      if (!out) throw std::runtime_error("cannot open output file '" + summary_out + "'");
      out << summary;
      std::cout << "wrote summary to " << summary_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
