#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rasba/config.hpp"
#include "rasba/search_protocol.hpp"
#include "rasba/trainer.hpp"

namespace rasba {

inline constexpr const char* kTraceHeader = "round,sim_time_s,lo,hi,oom_events,updates,loss,accuracy";
inline constexpr const char* kSweepHeader =
    "strategy,total_time_s,speedup,final_accuracy,rounds_to_convergence";
inline constexpr const char* kMonteCarloHeader =
    "searchers,seeds,mean_rounds,ci95_low,ci95_high,median_rounds,p95_rounds,max_rounds,"
    "mean_converged_batch,oracle_batch,exact_fraction";

/// Data, shards and simulated hardware for one configured federation.
struct Federation {
  TrainTestSplit data;
  std::vector<Shard> shards;
  std::vector<ClientProfile> profiles;
  std::uint64_t fingerprint = 0;  // identifies the task for sweep comparisons
};

/// Generates (or loads) the dataset, partitions it and draws one hardware tier
/// per client, all from the config seed.
Federation build_federation(const ExperimentConfig& config);

/// Shared batch the search should settle on: the smallest per-client memory
/// limit, clamped to the initial window.
BatchSize oracle_shared_batch(std::span<const ClientProfile> profiles, BatchSize b_min, BatchSize b_max);

/// Runs one strategy on a built federation. With `train` false only the
/// search and the clock are simulated (loss and accuracy are NaN).
ExperimentTrace run_strategy(const ExperimentConfig& config, const Federation& federation,
                             const Strategy& strategy, bool train = true);

struct RunOutputs {
  std::filesystem::path trace_csv;
  std::filesystem::path resolved_config;
};

/// Builds the configured federation, runs its strategy with training, and
/// writes trace.csv plus resolved.cfg into `out_dir`.
ExperimentTrace run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                               std::ostream* log = nullptr);

struct SweepRow {
  std::string strategy;
  double total_time_s = 0.0;
  double speedup = 1.0;
  double final_accuracy = 0.0;
  std::optional<int> rounds_to_convergence;
};

/// Table of strategies; speedup is relative to the smallest fixed batch in the
/// input, or to the first trace when none is fixed. Traces from different
/// tasks are rejected.
std::vector<SweepRow> summarize_sweep(std::span<const ExperimentTrace> traces);

/// Runs fixed(b) for every sweep batch plus rasba and writes sweep.csv and one
/// trace_<strategy>.csv per strategy.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                std::ostream* log = nullptr);

struct MonteCarloSummary {
  int searchers = 0;
  int seeds = 0;
  double mean_rounds = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  double median_rounds = 0.0;
  double p95_rounds = 0.0;
  int max_rounds = 0;
  double mean_converged_batch = 0.0;
  BatchSize oracle_batch = 0;
  double exact_fraction = 0.0;
  std::vector<int> rounds;  // one entry per seed, in seed order
  std::vector<BatchSize> converged_batches;
};

/// Search-only ensemble: for each searcher count k, `n_seeds` runs of the
/// configured federation with f = (m - k) / m, each run going until the
/// shared batch is settled. Seeds are derived from the config seed. Runs are
/// spread over `threads` workers (0 = hardware concurrency); results do not
/// depend on the worker count.
std::vector<MonteCarloSummary> run_monte_carlo(const ExperimentConfig& config, int n_seeds,
                                               std::span<const int> searcher_counts,
                                               unsigned threads = 0);

std::string trace_to_csv(const ExperimentTrace& trace);
std::string sweep_to_csv(std::span<const SweepRow> rows);
std::string monte_carlo_to_csv(std::span<const MonteCarloSummary> rows);

/// Writes through a temporary file in the same directory and renames it over
/// `path`, creating parent directories as needed.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace rasba
