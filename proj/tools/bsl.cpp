// Command line entry point: bsl run | validate | report.

#include "bsl/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Stochastic bilevel optimization stability and generalization harness", "bsl"};
  app.require_subcommand(1);

  std::string config_path;
  std::string results_dir;
  std::string out_dir;
  std::size_t workers = 0;
  std::uint64_t seed_override = 0;
  double sigma = 3.0;
  std::string long_csv;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "Experiment config (YAML)")->required();
    cmd->add_option("--out", out_dir, "Output directory (overrides config and BSL_OUTPUT_DIR)");
    cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--seed-override", seed_override, "Replace the config seed");
  };
  CLI::App* run = app.add_subcommand("run", "Run an experiment config");
  add_run_flags(run);
  CLI::App* validate = app.add_subcommand("validate", "Check a config and print resolved settings");
  add_run_flags(validate);
  CLI::App* report = app.add_subcommand("report", "Summarize a results directory");
  report->add_option("dir", results_dir, "Directory holding results.csv")->required();
  report->add_option("--sigma", sigma, "Standard errors of slack for bound checks")->check(CLI::NonNegativeNumber);
  report->add_option("--long", long_csv, "Write plot-ready long-format CSV to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  bsl::RunOptions opts;
  if (!out_dir.empty()) opts.out_dir = out_dir;
  if (workers > 0) opts.workers = workers;
  if (run->count("--seed-override") || validate->count("--seed-override")) opts.seed_override = seed_override;

  if (*run) return bsl::cmd_run(config_path, opts, std::cout, std::cerr);
  if (*validate) return bsl::cmd_validate(config_path, opts, std::cout, std::cerr);
  bsl::ReportOptions ropts;
  ropts.sigma = sigma;
  if (!long_csv.empty()) ropts.long_csv = long_csv;
  return bsl::cmd_report(results_dir, ropts, std::cout, std::cerr);
}
