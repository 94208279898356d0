// Command-line entry point: run, sweep, monte-carlo, validate.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.

#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "rasba/config.hpp"
#include "rasba/harness.hpp"
#include "rasba/trainer.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string config_path;
  std::filesystem::path out_dir = "rasba_out";
  std::optional<std::uint64_t> seed;
  int seeds = 10'000;
  bool quiet = false;
};

rasba::ExperimentConfig resolve(const Options& opt) {
  rasba::ExperimentConfig config;
  if (!opt.config_path.empty()) config = rasba::load_config(opt.config_path);
  if (opt.seed) config.seed = *opt.seed;
  rasba::validate(config);
  return config;
}

int cmd_validate(const Options& opt) {
  const auto config = resolve(opt);
  // Building the federation catches problems that need data, e.g. csv files
  // or a b_min that does not fit a hardware tier.
  const auto fed = rasba::build_federation(config);
  for (const auto& p : fed.profiles) {
    if (rasba::try_batch(p, config.b_min) == rasba::TryResult::kOutOfMemory) {
      throw rasba::ConfigError("b_min", 0, "does not fit in client " + std::to_string(p.id) + "'s memory");
    }
  }
  std::cout << rasba::to_config_text(config);
  std::cout << "# resolved: m=" << config.m << " f=" << config.f << " window [" << config.b_min << ","
            << config.b_max << "] strategy=" << config.strategy.label() << "\n";
  return 0;
}

int cmd_run(const Options& opt) {
  const auto config = resolve(opt);
  rasba::run_experiment(config, opt.out_dir, opt.quiet ? nullptr : &std::cerr);
  return 0;
}

int cmd_sweep(const Options& opt) {
  const auto config = resolve(opt);
  const auto rows = rasba::run_sweep(config, opt.out_dir, opt.quiet ? nullptr : &std::cerr);
  if (!opt.quiet) std::cerr << rasba::sweep_to_csv(rows);
  return 0;
}

int cmd_monte_carlo(const Options& opt) {
  const auto config = resolve(opt);
  if (!opt.quiet) {
    std::cerr << "monte-carlo: " << opt.seeds << " seeds per searcher count\n";
  }
  const auto rows = rasba::run_monte_carlo(config, opt.seeds, config.mc_searchers);
  const auto csv = rasba::monte_carlo_to_csv(rows);
  rasba::write_file_atomic(opt.out_dir / "monte_carlo.csv", csv);
  rasba::write_file_atomic(opt.out_dir / "resolved.cfg", rasba::to_config_text(config));
  if (!opt.quiet) std::cerr << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative batch-size search for federated learning (simulator)"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("--config", opt.config_path, "Experiment config file (built-in defaults if omitted)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", opt.seed, "Override the config seed");
  app.add_flag("--quiet", opt.quiet, "Suppress progress output");

  auto* run = app.add_subcommand("run", "Run one federation and write trace.csv");
  auto* sweep = app.add_subcommand("sweep", "Fixed batch sizes plus the search strategy; writes sweep.csv");
  auto* mc = app.add_subcommand("monte-carlo", "Search-only ensemble; writes monte_carlo.csv");
  mc->add_option("--seeds", opt.seeds, "Runs per searcher count")->check(CLI::PositiveNumber)->capture_default_str();
  auto* val = app.add_subcommand("validate", "Check the config and print resolved values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*mc) return cmd_monte_carlo(opt);
    if (*val) return cmd_validate(opt);
  } catch (const rasba::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rasba::NonFiniteLoss& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
