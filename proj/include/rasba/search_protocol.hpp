#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rasba/bounds.hpp"
#include "rasba/client_model.hpp"
#include "rasba/rng.hpp"
#include "rasba/trainer.hpp"

namespace rasba {

enum class StrategyKind { kRasba, kSingleProber, kFixed };

struct Strategy {
  StrategyKind kind = StrategyKind::kRasba;
  BatchSize fixed_batch = 0;  // only for kFixed

  static Strategy rasba() { return {}; }
  static Strategy single_prober() { return {StrategyKind::kSingleProber, 0}; }
  static Strategy fixed(BatchSize b) { return {StrategyKind::kFixed, b}; }

  // "rasba", "single_prober" or "fixed(<b>)".
  std::string label() const;

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

// Accepts the labels produced by Strategy::label(). Throws std::invalid_argument.
Strategy parse_strategy(std::string_view text);

struct FederationConfig {
  int m = 10;
  double f = 0.5;  // share of clients shielded from searching each round
  BatchSize b_min_init = 4;
  BatchSize b_max_init = 64;
  std::uint64_t master_seed = 0;
  Strategy strategy;
  int rounds = 25;
  // Keep going past `rounds` until the bounds are converged and every client
  // has trained at the shared batch (search-only ensembles use this).
  bool run_until_stable = false;
};

/// Throws std::invalid_argument on out-of-range fields.
void validate(const FederationConfig& config);

/// Clients that train at lo instead of probing while the search is open.
int shielded_count(const FederationConfig& config);
int searcher_count(const FederationConfig& config);

enum class Role { kSearcher, kShielded };

/// Shielded clients are drawn without replacement from the round's stream, so
/// the shielded set rotates. Converged bounds shield everyone.
std::vector<Role> assign_roles(const FederationConfig& config, int round, const BoundsState& bounds);

/// What a client remembers between rounds: the largest batch it has actually
/// trained at.
struct ClientState {
  BatchSize known_good = 1;
};

/// Read-only training inputs for one client. A null context means search-only
/// simulation: timing and bounds are modeled but no parameters are produced.
struct TrainingContext {
  const Dataset* data = nullptr;
  const Shard* shard = nullptr;
  const ModelParams* model = nullptr;
  double lr = 0.1;
  int epochs = 1;
};

struct ModelUpdate {
  ModelParams params;
  double weight = 0.0;
};

struct RoundReport {
  int client_id = 0;
  BoundsState bounds{1, 2};
  std::optional<ModelUpdate> update;
  std::optional<ProbeOutcome> probe;
  double sim_time = 0.0;
  int oom_events = 0;
  BatchSize trained_batch = 0;  // 0 when no update was produced
};

/// One client's work for a round.
///
/// Shielded: trains at the broadcast lo. If lo turns out not to fit (success
/// elsewhere was over-optimistic for this client) the OOM is reported as
/// failure evidence at lo and the client falls back to its own known-good
/// batch, so it still returns an update.
///
/// Searcher: probes a uniform batch in (lo, hi). Success trains at the probe;
/// OOM returns no update and costs one failed batch load.
RoundReport client_round(const ClientProfile& profile, Role role, const BoundsState& broadcast,
                         ClientState& state, Rng& probe_rng, Rng& train_rng,
                         const TrainingContext* training);

/// Baseline without search: every client trains at `batch` or fails with OOM.
RoundReport fixed_batch_round(const ClientProfile& profile, BatchSize batch, Rng& train_rng,
                              const TrainingContext* training);

struct RoundMetrics {
  int oom_events = 0;
  int updates = 0;
  double round_time = 0.0;  // synchronous barrier: slowest client
};

struct ServerRoundResult {
  ModelParams model;
  BoundsState bounds;
  RoundMetrics metrics;
};

/// Merges report bounds and FedAvg-aggregates the reports that carry updates.
/// With no updates the model is returned unchanged. Reports whose probe lies
/// outside the broadcast window are stale: their bounds are ignored.
ServerRoundResult server_round(std::span<const RoundReport> reports, const ModelParams& model,
                               const BoundsState& broadcast);

struct TraceRow {
  int round = 0;
  double sim_time_s = 0.0;  // cumulative
  BatchSize lo = 0;
  BatchSize hi = 0;
  int oom_events = 0;
  int updates = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  bool searching = false;  // broadcast bounds were still open this round
  double round_time_s = 0.0;
};

struct ExperimentTrace {
  std::string label;
  BoundsState initial{1, 2};
  std::vector<TraceRow> rows;
  bool is_search = false;
  std::uint64_t task_fingerprint = 0;

  double total_time() const { return rows.empty() ? 0.0 : rows.back().sim_time_s; }
  double final_accuracy() const { return rows.empty() ? 0.0 : rows.back().accuracy; }
  bool converged() const;
  std::optional<BatchSize> converged_batch() const;
  /// Round after which the bounds stayed at their final, converged value.
  std::optional<int> rounds_to_convergence() const;
};

struct TrainingSetup {
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  std::span<const Shard> shards;  // indexed by client id
  ModelParams initial;
  double lr = 0.1;
  int epochs = 1;
};

/// Runs the federation round by round. Deterministic for a given config:
/// client streams are keyed by (master_seed, client id, round). Config and
/// profile problems are reported before the first round.
ExperimentTrace run_search(const FederationConfig& config, std::span<const ClientProfile> profiles,
                           const TrainingSetup* training = nullptr);

}  // namespace rasba
