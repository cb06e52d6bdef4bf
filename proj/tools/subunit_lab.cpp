#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "sublab/error.hpp"
#include "sublab/experiment.hpp"
#include "sublab/io.hpp"

namespace {

struct StageArgs {
  std::string config;
  std::string out = "out";
  int threads = 1;
  bool strict = false;
};

void add_stage(CLI::App& app, const std::string& name, const std::string& help,
               StageArgs& args) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config", args.config, "Experiment config (JSON)")->required();
  sub->add_option("--out", args.out, "Output directory");
  sub->add_option("--threads", args.threads,
                  "Worker threads (SUBUNIT_LAB_THREADS overrides)");
  sub->add_flag("--strict", args.strict,
                "Treat report-only checks as required");
}

int run_stage(const std::string& name, const StageArgs& args) {
  sublab::ExperimentConfig config;
  sublab::RunOptions options;
  try {
    config = sublab::load_config(args.config);
    options.threads = sublab::resolve_threads(args.threads);
  } catch (const sublab::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return sublab::exit_code::config;
  }
  options.out = args.out;
  options.strict = args.strict;
  options.stage = sublab::stage_from_string(name);
  const auto outcome = sublab::run_experiment(config, options);
  if (outcome.exit_code == sublab::exit_code::ok) {
    std::size_t passed = 0;
    for (const auto& [flag, value] : outcome.flags) passed += value ? 1 : 0;
    std::cout << config.name << ": " << passed << "/" << outcome.flags.size()
              << " flags pass; artifacts in " << options.out.string() << "\n";
  } else {
    std::cerr << config.name << ": " << outcome.message << "\n";
  }
  for (const auto& [flag, value] : outcome.flags) {
    if (!value) std::cout << "  false: " << flag << "\n";
  }
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subunit-metric experiments for infinitely degenerate equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("subunit-lab ") + sublab::kVersion);

  std::map<std::string, StageArgs> stages;
  const std::pair<const char*, const char*> names[] = {
      {"dist", "Distance fields for every centre"},
      {"balls", "Ball volumes, non-doubling orders and box checks"},
      {"cutoff", "Cutoff sequences and special cutoffs"},
      {"solve", "Discrete solution of the configured problem"},
      {"diagnose", "Regularity diagnostics on the solution"},
      {"run", "Full pipeline with plots"}};
  for (const auto& [name, help] : names) add_stage(app, name, help, stages[name]);

  std::string report_a;
  std::string report_b;
  std::map<std::string, double> budgets;
  auto* cmp = app.add_subcommand("compare", "Drift of empirical constants between two reports");
  cmp->add_option("report_a", report_a, "First report.json")->required()->check(CLI::ExistingFile);
  cmp->add_option("report_b", report_b, "Second report.json")->required()->check(CLI::ExistingFile);
  cmp->add_option("--budget", budgets, "Per-family budget override, family=value")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sublab::exit_code::config;
  }

  for (const auto& [name, args] : stages) {
    if (app.got_subcommand(name)) return run_stage(name, args);
  }
  try {
    const auto result = sublab::compare_reports(sublab::read_text(report_a),
                                                sublab::read_text(report_b), budgets);
    std::cout << result.table();
    return result.flagged == 0 ? 0 : sublab::exit_code::required_flag;
  } catch (const sublab::SchemaMismatch& e) {
    std::cerr << "schema mismatch: " << e.what() << "\n";
    return sublab::exit_code::config;
  } catch (const sublab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sublab::exit_code::config;
  }
}
