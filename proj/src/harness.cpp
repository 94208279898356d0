#include "rasba/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rasba {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Identifies dataset, partition and hardware; ignores search and budget keys.
std::uint64_t task_fingerprint(const ExperimentConfig& config) {
  ExperimentConfig task = config;
  const ExperimentConfig defaults;
  task.f = defaults.f;
  task.b_min = defaults.b_min;
  task.b_max = defaults.b_max;
  task.strategy = defaults.strategy;
  task.rounds = defaults.rounds;
  task.sweep_batches = defaults.sweep_batches;
  task.mc_searchers = defaults.mc_searchers;
  return fnv1a(to_config_text(task));
}

std::string fmt(double v, int precision = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string file_label(const std::string& strategy) {
  std::string out;
  for (char c : strategy) {
    if (c == '(') {
      out += '_';
    } else if (c != ')') {
      out += c;
    }
  }
  return out;
}

void note(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n' << std::flush;
}

}  // namespace

Federation build_federation(const ExperimentConfig& config) {
  Federation fed;
  if (config.features_csv.empty()) {
    BlobSpec spec;
    spec.num_classes = config.classes;
    spec.dim = config.dim;
    spec.n_train = config.n_train;
    spec.n_test = config.n_test;
    spec.center_scale = config.center_scale;
    spec.noise = config.noise;
    fed.data = make_blobs(spec, config.seed);
  } else {
    fed.data = load_csv_dataset(config.features_csv, config.labels_csv, config.test_fraction, config.seed);
  }

  PartitionSpec part{config.alpha, config.m, config.min_shard};
  Rng part_rng = make_stream(config.seed, StreamTag::kPartition);
  fed.shards = dirichlet_partition(fed.data.train.labels, fed.data.train.num_classes, part, part_rng);

  Rng tier_rng = make_stream(config.seed, StreamTag::kProfiles);
  std::uniform_int_distribution<std::size_t> tier(0, config.hardware_tiers.size() - 1);
  for (int i = 0; i < config.m; ++i) {
    const double capacity = config.hardware_tiers[tier(tier_rng)];
    fed.profiles.push_back(make_profile(i, static_cast<BatchSize>(fed.shards[static_cast<std::size_t>(i)].size()),
                                        capacity, config.mem_fixed_mb, config.mem_per_sample_mb,
                                        config.t_load_s, config.t_fixed_s, config.t_per_sample_s));
  }
  fed.fingerprint = task_fingerprint(config);
  return fed;
}

BatchSize oracle_shared_batch(std::span<const ClientProfile> profiles, BatchSize b_min, BatchSize b_max) {
  if (profiles.empty()) throw std::invalid_argument("oracle over no clients");
  BatchSize cap = std::numeric_limits<BatchSize>::max();
  BatchSize min_n = std::numeric_limits<BatchSize>::max();
  for (const auto& p : profiles) {
    cap = std::min(cap, max_feasible_batch(p));
    min_n = std::min(min_n, p.n_samples);
  }
  return std::clamp(cap, b_min, std::max(b_min, std::min(b_max, min_n)));
}

ExperimentTrace run_strategy(const ExperimentConfig& config, const Federation& federation,
                             const Strategy& strategy, bool train) {
  FederationConfig fc = config.federation();
  fc.strategy = strategy;
  ExperimentTrace trace;
  if (train) {
    TrainingSetup setup;
    setup.train = &federation.data.train;
    setup.test = &federation.data.test;
    setup.shards = federation.shards;
    setup.initial = ModelParams::zeros(federation.data.train.num_classes, federation.data.train.dim());
    setup.lr = config.lr;
    setup.epochs = config.epochs;
    trace = run_search(fc, federation.profiles, &setup);
  } else {
    trace = run_search(fc, federation.profiles, nullptr);
  }
  trace.task_fingerprint = federation.fingerprint;
  return trace;
}

ExperimentTrace run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                               std::ostream* log) {
  validate(config);
  note(log, "building federation: m=" + std::to_string(config.m) + " seed=" + std::to_string(config.seed));
  const Federation fed = build_federation(config);
  note(log, "running " + config.strategy.label() + " for " + std::to_string(config.rounds) + " rounds");
  ExperimentTrace trace = run_strategy(config, fed, config.strategy, true);
  write_file_atomic(out_dir / "trace.csv", trace_to_csv(trace));
  write_file_atomic(out_dir / "resolved.cfg", to_config_text(config));
  std::string done = "done: sim_time=" + fmt(trace.total_time(), 3) + "s accuracy=" + fmt(trace.final_accuracy(), 4);
  if (auto b = trace.converged_batch(); b && trace.is_search) done += " shared_batch=" + std::to_string(*b);
  note(log, done);
  return trace;
}

std::vector<SweepRow> summarize_sweep(std::span<const ExperimentTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("summarize_sweep needs at least one trace");
  for (const auto& t : traces) {
    if (t.task_fingerprint != traces.front().task_fingerprint) {
      throw std::invalid_argument("trace '" + t.label + "' was produced on a different task");
    }
  }

  const ExperimentTrace* baseline = &traces.front();
  std::optional<BatchSize> smallest;
  for (const auto& t : traces) {
    if (t.is_search) continue;
    if (!smallest || t.initial.lo() < *smallest) {
      smallest = t.initial.lo();
      baseline = &t;
    }
  }

  std::vector<SweepRow> rows;
  for (const auto& t : traces) {
    SweepRow row;
    row.strategy = t.label;
    row.total_time_s = t.total_time();
    row.speedup = &t == baseline ? 1.0 : baseline->total_time() / t.total_time();
    row.final_accuracy = t.final_accuracy();
    row.rounds_to_convergence = t.rounds_to_convergence();
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                std::ostream* log) {
  validate(config);
  const Federation fed = build_federation(config);
  std::vector<Strategy> strategies;
  for (BatchSize b : config.sweep_batches) strategies.push_back(Strategy::fixed(b));
  strategies.push_back(Strategy::rasba());

  std::vector<ExperimentTrace> traces;
  for (const auto& s : strategies) {
    note(log, "sweep: running " + s.label());
    traces.push_back(run_strategy(config, fed, s, true));
    write_file_atomic(out_dir / ("trace_" + file_label(s.label()) + ".csv"), trace_to_csv(traces.back()));
  }
  auto rows = summarize_sweep(traces);
  write_file_atomic(out_dir / "sweep.csv", sweep_to_csv(rows));
  write_file_atomic(out_dir / "resolved.cfg", to_config_text(config));
  return rows;
}

std::vector<MonteCarloSummary> run_monte_carlo(const ExperimentConfig& config, int n_seeds,
                                               std::span<const int> searcher_counts, unsigned threads) {
  validate(config);
  if (n_seeds < 1) throw std::invalid_argument("monte carlo needs at least one seed");
  const Federation fed = build_federation(config);
  const BatchSize oracle = oracle_shared_batch(fed.profiles, config.b_min, config.b_max);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  std::vector<MonteCarloSummary> out;
  for (int k : searcher_counts) {
    if (k < 1 || k > config.m) throw std::invalid_argument("searcher count outside [1, m]");
    FederationConfig fc = config.federation();
    fc.strategy = Strategy::rasba();
    fc.f = static_cast<double>(config.m - k) / static_cast<double>(config.m);
    fc.run_until_stable = true;
    fc.rounds = 1;

    MonteCarloSummary s;
    s.searchers = k;
    s.seeds = n_seeds;
    s.oracle_batch = oracle;
    s.rounds.assign(static_cast<std::size_t>(n_seeds), 0);
    s.converged_batches.assign(static_cast<std::size_t>(n_seeds), 0);

    auto work = [&](unsigned worker) {
      for (auto j = static_cast<std::size_t>(worker); j < static_cast<std::size_t>(n_seeds); j += threads) {
        FederationConfig run = fc;
        run.master_seed = derive_seed(config.seed, j);
        const ExperimentTrace trace = run_search(run, fed.profiles, nullptr);
        s.rounds[j] = trace.rounds_to_convergence().value_or(-1);
        s.converged_batches[j] = trace.converged_batch().value_or(0);
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    }

    const auto n = static_cast<double>(n_seeds);
    const double mean = std::accumulate(s.rounds.begin(), s.rounds.end(), 0.0) / n;
    double ss = 0.0;
    for (int r : s.rounds) ss += (r - mean) * (r - mean);
    const double sd = n_seeds > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double half = 1.96 * sd / std::sqrt(n);
    std::vector<int> sorted = s.rounds;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    s.mean_rounds = mean;
    s.ci95_low = mean - half;
    s.ci95_high = mean + half;
    s.median_rounds = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    // nearest-rank percentile
    s.p95_rounds = sorted[static_cast<std::size_t>(std::ceil(0.95 * n)) - 1];
    s.max_rounds = sorted.back();
    double batch_sum = 0.0;
    std::size_t exact = 0;
    for (BatchSize b : s.converged_batches) {
      batch_sum += static_cast<double>(b);
      if (b == oracle) ++exact;
    }
    s.mean_converged_batch = batch_sum / n;
    s.exact_fraction = static_cast<double>(exact) / n;
    out.push_back(std::move(s));
  }
  return out;
}

std::string trace_to_csv(const ExperimentTrace& trace) {
  std::ostringstream os;
  os << kTraceHeader << '\n';
  for (const auto& r : trace.rows) {
    os << r.round << ',' << fmt(r.sim_time_s) << ',' << r.lo << ',' << r.hi << ',' << r.oom_events << ','
       << r.updates << ',' << fmt(r.loss) << ',' << fmt(r.accuracy) << '\n';
  }
  return os.str();
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    os << r.strategy << ',' << fmt(r.total_time_s) << ',' << fmt(r.speedup, 4) << ',' << fmt(r.final_accuracy)
       << ',';
    if (r.rounds_to_convergence) os << *r.rounds_to_convergence;
    os << '\n';
  }
  return os.str();
}

std::string monte_carlo_to_csv(std::span<const MonteCarloSummary> rows) {
  std::ostringstream os;
  os << kMonteCarloHeader << '\n';
  for (const auto& r : rows) {
    os << r.searchers << ',' << r.seeds << ',' << fmt(r.mean_rounds) << ',' << fmt(r.ci95_low) << ','
       << fmt(r.ci95_high) << ',' << fmt(r.median_rounds, 1) << ',' << fmt(r.p95_rounds, 1) << ','
       << r.max_rounds << ',' << fmt(r.mean_converged_batch) << ',' << r.oracle_batch << ','
       << fmt(r.exact_fraction) << '\n';
  }
  return os.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rasba
