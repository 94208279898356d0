#include "rasba/search_protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rasba {

namespace {

// Guards run_until_stable. Each round with a searcher narrows the window, and
// each correction strictly lowers hi, so real runs stop far earlier.
constexpr int kMaxRounds = 100'000;

ModelUpdate train_update(const ClientProfile& profile, BatchSize batch, Rng& train_rng,
                         const TrainingContext* training) {
  if (training == nullptr) return {ModelParams{}, static_cast<double>(profile.n_samples)};
  auto result = local_train(*training->model, *training->data, *training->shard, batch,
                            training->epochs, training->lr, train_rng);
  return {std::move(result.model), static_cast<double>(training->shard->size())};
}

}  // namespace

std::string Strategy::label() const {
  switch (kind) {
    case StrategyKind::kRasba:
      return "rasba";
    case StrategyKind::kSingleProber:
      return "single_prober";
    case StrategyKind::kFixed:
      return "fixed(" + std::to_string(fixed_batch) + ")";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "rasba") return Strategy::rasba();
  if (text == "single_prober") return Strategy::single_prober();
  if (text.starts_with("fixed(") && text.ends_with(")")) {
    const auto digits = text.substr(6, text.size() - 7);
    BatchSize b = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), b);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && b >= 1) {
      return Strategy::fixed(b);
    }
  }
  throw std::invalid_argument("unknown strategy '" + std::string(text) +
                              "' (expected rasba, single_prober or fixed(<batch>))");
}

void validate(const FederationConfig& c) {
  if (c.m < 1) throw std::invalid_argument("m must be at least 1");
  if (!(c.f >= 0.0 && c.f < 1.0)) throw std::invalid_argument("f must lie in [0, 1)");
  if (c.rounds < 1) throw std::invalid_argument("rounds must be at least 1");
  if (c.b_min_init < 1) throw std::invalid_argument("b_min must be positive");
  if (c.b_min_init > c.b_max_init) throw std::invalid_argument("b_min exceeds b_max");
  if (c.strategy.kind == StrategyKind::kFixed && c.strategy.fixed_batch < 1) {
    throw std::invalid_argument("fixed batch must be positive");
  }
  if (c.strategy.kind == StrategyKind::kRasba && searcher_count(c) < 1) {
    throw std::invalid_argument("f leaves no searching client (m - ceil(f*m) must be >= 1)");
  }
}

int shielded_count(const FederationConfig& c) {
  switch (c.strategy.kind) {
    case StrategyKind::kRasba:
      // Tolerance keeps e.g. 0.7 * 10 from rounding up to 8.
      return static_cast<int>(std::ceil(c.f * c.m - 1e-9));
    case StrategyKind::kSingleProber:
      return c.m - 1;
    case StrategyKind::kFixed:
      return c.m;
  }
  return c.m;
}

int searcher_count(const FederationConfig& c) { return c.m - shielded_count(c); }

std::vector<Role> assign_roles(const FederationConfig& c, int round, const BoundsState& bounds) {
  const auto m = static_cast<std::size_t>(c.m);
  if (bounds.converged()) return std::vector<Role>(m, Role::kShielded);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(c.master_seed, StreamTag::kRoles, 0, static_cast<std::uint64_t>(round));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Role> roles(m, Role::kSearcher);
  const auto shielded = static_cast<std::size_t>(shielded_count(c));
  for (std::size_t i = 0; i < shielded && i < m; ++i) roles[order[i]] = Role::kShielded;
  return roles;
}

RoundReport client_round(const ClientProfile& profile, Role role, const BoundsState& broadcast,
                         ClientState& state, Rng& probe_rng, Rng& train_rng,
                         const TrainingContext* training) {
  RoundReport report;
  report.client_id = profile.id;
  report.bounds = broadcast;

  if (role == Role::kShielded) {
    BatchSize batch = broadcast.lo();
    if (try_batch(profile, batch) == TryResult::kOutOfMemory) {
      // lo was learned from other clients and does not fit here.
      report.oom_events = 1;
      report.sim_time += failed_attempt_time(profile);
      report.bounds = BoundsState(state.known_good, batch);
      batch = state.known_good;
    }
    report.update = train_update(profile, batch, train_rng, training);
    report.trained_batch = batch;
    report.sim_time += epoch_time(profile, batch);
    state.known_good = std::max(state.known_good, batch);
    return report;
  }

  const BatchSize b = sample_probe(broadcast, probe_rng);
  const bool ok = try_batch(profile, b) == TryResult::kSuccess;
  report.probe = ProbeOutcome{b, ok};
  report.bounds = apply_outcome(broadcast, *report.probe);
  if (ok) {
    report.update = train_update(profile, b, train_rng, training);
    report.trained_batch = b;
    report.sim_time = epoch_time(profile, b);
    state.known_good = std::max(state.known_good, b);
  } else {
    report.oom_events = 1;
    report.sim_time = failed_attempt_time(profile);
  }
  return report;
}

RoundReport fixed_batch_round(const ClientProfile& profile, BatchSize batch, Rng& train_rng,
                              const TrainingContext* training) {
  RoundReport report;
  report.client_id = profile.id;
  report.bounds = BoundsState(batch, batch + 1);
  if (try_batch(profile, batch) == TryResult::kOutOfMemory) {
    report.oom_events = 1;
    report.sim_time = failed_attempt_time(profile);
    return report;
  }
  report.update = train_update(profile, batch, train_rng, training);
  report.trained_batch = batch;
  report.sim_time = epoch_time(profile, batch);
  return report;
}

ServerRoundResult server_round(std::span<const RoundReport> reports, const ModelParams& model,
                               const BoundsState& broadcast) {
  if (reports.empty()) throw std::invalid_argument("server_round needs at least one report");

  std::vector<BoundsState> evidence;
  evidence.reserve(reports.size());
  std::vector<WeightedUpdate> updates;
  RoundMetrics metrics;
  for (const auto& r : reports) {
    const bool stale = r.probe && !broadcast.contains(r.probe->probed_batch);
    evidence.push_back(stale ? broadcast : r.bounds);
    metrics.oom_events += r.oom_events;
    metrics.round_time = std::max(metrics.round_time, r.sim_time);
    if (r.update) {
      ++metrics.updates;
      if (model.values.size() > 0) updates.push_back({r.client_id, r.update->params, r.update->weight});
    }
  }

  ServerRoundResult out{model, merge(evidence), metrics};
  if (!updates.empty()) out.model = fedavg(updates);
  return out;
}

bool ExperimentTrace::converged() const {
  if (rows.empty()) return initial.converged();
  return rows.back().hi - rows.back().lo == 1;
}

std::optional<BatchSize> ExperimentTrace::converged_batch() const {
  if (!converged()) return std::nullopt;
  return rows.empty() ? initial.lo() : rows.back().lo;
}

std::optional<int> ExperimentTrace::rounds_to_convergence() const {
  if (!is_search || !converged()) return std::nullopt;
  int last_change = 0;
  BatchSize lo = initial.lo();
  BatchSize hi = initial.hi();
  for (const auto& row : rows) {
    if (row.lo != lo || row.hi != hi) last_change = row.round;
    lo = row.lo;
    hi = row.hi;
  }
  return last_change;
}

ExperimentTrace run_search(const FederationConfig& config, std::span<const ClientProfile> profiles,
                           const TrainingSetup* training) {
  validate(config);
  if (profiles.size() != static_cast<std::size_t>(config.m)) {
    throw std::invalid_argument("expected " + std::to_string(config.m) + " client profiles, got " +
                                std::to_string(profiles.size()));
  }
  BatchSize min_n = std::numeric_limits<BatchSize>::max();
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    validate(profiles[i]);
    if (profiles[i].id != static_cast<int>(i)) {
      throw std::invalid_argument("client profiles must be ordered by id 0..m-1");
    }
    min_n = std::min(min_n, profiles[i].n_samples);
  }
  if (training != nullptr) {
    if (training->train == nullptr || training->test == nullptr ||
        training->shards.size() != profiles.size()) {
      throw std::invalid_argument("training setup needs train/test data and one shard per client");
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      if (static_cast<BatchSize>(training->shards[i].size()) != profiles[i].n_samples) {
        throw std::invalid_argument("client " + std::to_string(i) + ": shard size differs from n_samples");
      }
    }
  }

  const bool is_fixed = config.strategy.kind == StrategyKind::kFixed;
  ExperimentTrace trace;
  trace.label = config.strategy.label();
  trace.is_search = !is_fixed;
  if (is_fixed) {
    const BatchSize b = config.strategy.fixed_batch;
    if (b > min_n) {
      throw std::invalid_argument("fixed batch " + std::to_string(b) +
                                  " exceeds the smallest client dataset (" + std::to_string(min_n) + ")");
    }
    trace.initial = BoundsState(b, b + 1);
  } else {
    trace.initial = init_bounds(config.b_min_init, config.b_max_init, min_n);
    for (const auto& p : profiles) {
      if (try_batch(p, config.b_min_init) == TryResult::kOutOfMemory) {
        throw std::invalid_argument("b_min " + std::to_string(config.b_min_init) +
                                    " does not fit in client " + std::to_string(p.id) + "'s memory");
      }
    }
  }

  std::vector<ClientState> states(profiles.size(), ClientState{config.b_min_init});
  ModelParams model = training ? training->initial : ModelParams{};
  BoundsState bounds = trace.initial;
  double clock = 0.0;
  const Rng unused_train_rng;

  auto stable = [&] {
    if (!bounds.converged()) return false;
    return std::all_of(states.begin(), states.end(),
                       [&](const ClientState& s) { return s.known_good >= bounds.lo(); });
  };

  std::vector<RoundReport> reports(profiles.size());
  for (int round = 1;; ++round) {
    if (round > config.rounds && (!config.run_until_stable || is_fixed || stable())) break;
    if (round > kMaxRounds) throw std::runtime_error("search did not stabilise");

    const std::vector<Role> roles =
        is_fixed ? std::vector<Role>(profiles.size(), Role::kShielded) : assign_roles(config, round, bounds);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      const auto id = static_cast<std::uint64_t>(i);
      const auto r = static_cast<std::uint64_t>(round);
      Rng train_rng = training ? make_stream(config.master_seed, StreamTag::kTraining, id, r) : unused_train_rng;
      TrainingContext ctx;
      if (training) ctx = {training->train, &training->shards[i], &model, training->lr, training->epochs};
      const TrainingContext* ctx_ptr = training ? &ctx : nullptr;

      if (is_fixed) {
        reports[i] = fixed_batch_round(profiles[i], config.strategy.fixed_batch, train_rng, ctx_ptr);
      } else {
        Rng probe_rng = make_stream(config.master_seed, StreamTag::kProbe, id, r);
        reports[i] = client_round(profiles[i], roles[i], bounds, states[i], probe_rng, train_rng, ctx_ptr);
      }
    }

    const bool searching = !bounds.converged();
    auto result = server_round(reports, model, bounds);
    model = std::move(result.model);
    if (!is_fixed) bounds = result.bounds;
    clock += result.metrics.round_time;

    TraceRow row;
    row.round = round;
    row.sim_time_s = clock;
    row.lo = bounds.lo();
    row.hi = bounds.hi();
    row.oom_events = result.metrics.oom_events;
    row.updates = result.metrics.updates;
    row.searching = searching && !is_fixed;
    row.round_time_s = result.metrics.round_time;
    if (training) {
      const auto eval = evaluate(model, *training->test);
      row.loss = eval.loss;
      row.accuracy = eval.accuracy;
    } else {
      row.loss = std::numeric_limits<double>::quiet_NaN();
      row.accuracy = std::numeric_limits<double>::quiet_NaN();
    }
    trace.rows.push_back(row);
  }
  return trace;
}

}  // namespace rasba
