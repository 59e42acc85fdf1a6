// selectnet-lab: run imbalanced-classification experiments, summarise
// results directories, and run the built-in property checks.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "selectnet/config.hpp"
#include "selectnet/errors.hpp"
#include "selectnet/harness.hpp"
#include "selectnet/selfcheck.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

void print_summary(const selectnet::Summary& summary) {
  std::printf("%-12s %5s %12s %13s\n", "strategy", "runs", "overall_acc", "minor_recall");
  for (const auto& row : summary.rows)
    std::printf("%-12s %5zu %12.4f %13.4f\n", selectnet::to_string(row.strategy).c_str(), row.runs, row.overall_acc,
                row.minor_recall);
}

int run_command(const std::string& config_path, const std::vector<std::string>& strategies,
                const std::vector<std::uint64_t>& seeds, const std::string& out,
                const std::vector<std::string>& assignments) {
  selectnet::ExperimentConfig config;
  try {
    auto kv = config_path.empty() ? selectnet::KeyValues{} : selectnet::KeyValues::load(config_path);
    for (const auto& a : assignments) kv.set_assignment(a);
    config = selectnet::ExperimentConfig::from_key_values(kv);
    if (!strategies.empty()) {
      config.strategies.clear();
      for (const auto& name : strategies) {
        const auto kind = selectnet::parse_strategy(name);
        if (!kind) throw selectnet::ConfigError("unknown strategy '" + name + "'");
        config.strategies.push_back(*kind);
      }
    }
    if (!seeds.empty()) config.seeds = seeds;
    if (!out.empty()) config.out_dir = out;
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    const auto result = selectnet::run_experiment(config);
    print_summary(selectnet::summarize(result.records, result.num_classes, config.minor_classes));
    std::cout << "results written to " << config.out_dir.string() << '\n';
  } catch (const selectnet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n'
              << "files already written to " << config.out_dir.string() << " are partial results\n";
    return kRuntimeError;
  }
  return kOk;
}

int summarize_command(const std::string& dir) {
  try {
    print_summary(selectnet::summarize_directory(dir));
  } catch (const std::exception& e) {
    std::cerr << "summarize failed: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}

int selfcheck_command() {
  bool all = true;
  for (const auto& r : selectnet::run_selfchecks()) {
    std::printf("[%s] %s (%.2fs): %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
    all &= r.passed;
  }
  return all ? kOk : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SelectNet imbalanced-classification laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir;
  std::vector<std::string> strategies, assignments;
  std::vector<std::uint64_t> seeds;

  auto* run = app.add_subcommand("run", "Run an experiment");
  run->add_option("--config", config_path, "Key-value config file")->check(CLI::ExistingFile);
  run->add_option("--strategy", strategies, "Strategy to run (repeatable; replaces the config list)");
  run->add_option("--seed", seeds, "Seed to run (repeatable; replaces the config list)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--set", assignments, "Override a config key, key=value (repeatable)");

  auto* summarize = app.add_subcommand("summarize", "Rebuild summary.json from a results directory");
  summarize->add_option("--in", in_dir, "Results directory")->required()->check(CLI::ExistingDirectory);

  auto* selfcheck = app.add_subcommand("selfcheck", "Run the property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*run) return run_command(config_path, strategies, seeds, out_dir, assignments);
  if (*summarize) return summarize_command(in_dir);
  if (*selfcheck) return selfcheck_command();
  return kConfigError;
}
