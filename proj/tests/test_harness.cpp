#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <stdexcept>

#include "rasba/harness.hpp"

using rasba::ExperimentConfig;
using rasba::ExperimentTrace;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_train = 3000;
  c.n_test = 500;
  c.min_shard = 128;
  c.rounds = 6;
  c.sweep_batches = {4, 16, 64};
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rasba_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("CSV headers are exact") {
  CHECK(std::string(rasba::kTraceHeader) == "round,sim_time_s,lo,hi,oom_events,updates,loss,accuracy");
  CHECK(std::string(rasba::kSweepHeader) == "strategy,total_time_s,speedup,final_accuracy,rounds_to_convergence");
  ExperimentTrace empty;
  CHECK(rasba::trace_to_csv(empty) == std::string(rasba::kTraceHeader) + "\n");
}

TEST_CASE("build_federation matches the configured task") {
  const auto c = small_config();
  const auto fed = rasba::build_federation(c);
  CHECK(fed.profiles.size() == 10);
  CHECK(fed.shards.size() == 10);
  std::size_t total = 0;
  for (std::size_t i = 0; i < fed.shards.size(); ++i) {
    CHECK(fed.shards[i].size() >= c.min_shard);
    CHECK(fed.profiles[i].n_samples == static_cast<rasba::BatchSize>(fed.shards[i].size()));
    total += fed.shards[i].size();
  }
  CHECK(total == c.n_train);
  CHECK(rasba::oracle_shared_batch(fed.profiles, 4, 64) == 64);

  auto other = c;
  other.rounds = 99;
  other.strategy = rasba::Strategy::fixed(8);
  CHECK(rasba::build_federation(other).fingerprint == fed.fingerprint);
  other.seed = 7;
  CHECK(rasba::build_federation(other).fingerprint != fed.fingerprint);
}

TEST_CASE("simulated clock equals an independent re-summation over profiles") {
  const auto c = small_config();
  const auto fed = rasba::build_federation(c);
  const auto trace = rasba::run_strategy(c, fed, rasba::Strategy::fixed(16), false);
  double expected = 0.0;
  double round_time = 0.0;
  for (const auto& p : fed.profiles) {
    const auto batches = static_cast<double>((p.n_samples + 15) / 16);
    round_time = std::max(round_time, batches * (p.t_load_s + p.t_fixed_s) +
                                          static_cast<double>(p.n_samples) * p.t_per_sample_s);
  }
  for (const auto& row : trace.rows) {
    expected += round_time;
    CHECK(row.sim_time_s == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("summarize_sweep: a single trace has speedup 1, mixed tasks are rejected") {
  const auto c = small_config();
  const auto fed = rasba::build_federation(c);
  std::vector<ExperimentTrace> one{rasba::run_strategy(c, fed, rasba::Strategy::fixed(16), false)};
  const auto rows = rasba::summarize_sweep(one);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].speedup == 1.0);

  auto other_cfg = c;
  other_cfg.seed = 5;
  const auto other = rasba::build_federation(other_cfg);
  one.push_back(rasba::run_strategy(other_cfg, other, rasba::Strategy::fixed(64), false));
  CHECK_THROWS_AS(rasba::summarize_sweep(one), std::invalid_argument);
  CHECK_THROWS_AS(rasba::summarize_sweep(std::span<const ExperimentTrace>{}), std::invalid_argument);
}

TEST_CASE("run_sweep writes one row per strategy and is reproducible") {
  const auto c = small_config();
  const auto dir_a = scratch("sweep_a");
  const auto dir_b = scratch("sweep_b");
  const auto rows = rasba::run_sweep(c, dir_a);
  rasba::run_sweep(c, dir_b);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].strategy == "fixed(4)");
  CHECK(rows[0].speedup == 1.0);
  CHECK(rows[3].strategy == "rasba");
  CHECK(rows[1].speedup > 1.0);
  CHECK(rows[2].speedup > rows[1].speedup);
  CHECK(rows[3].rounds_to_convergence.has_value());
  CHECK_FALSE(rows[0].rounds_to_convergence.has_value());

  const auto sweep = slurp(dir_a / "sweep.csv");
  CHECK(first_line(sweep) == rasba::kSweepHeader);
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 5);
  for (const char* f : {"sweep.csv", "trace_fixed_4.csv", "trace_fixed_16.csv", "trace_fixed_64.csv",
                        "trace_rasba.csv", "resolved.cfg"}) {
    CHECK(std::filesystem::exists(dir_a / f));
    CHECK(slurp(dir_a / f) == slurp(dir_b / f));
  }
  CHECK(first_line(slurp(dir_a / "trace_rasba.csv")) == rasba::kTraceHeader);
  CHECK_FALSE(std::filesystem::exists(dir_a / "sweep.csv.tmp"));
}

TEST_CASE("run_experiment writes a trace and the resolved config") {
  const auto c = small_config();
  const auto dir = scratch("run");
  std::ostringstream log;
  const auto trace = rasba::run_experiment(c, dir, &log);
  CHECK(trace.rows.size() == 6);
  const auto csv = slurp(dir / "trace.csv");
  CHECK(first_line(csv) == rasba::kTraceHeader);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(rasba::to_config_text(rasba::load_config(dir / "resolved.cfg")) == rasba::to_config_text(c));
  CHECK(log.str().find("done") != std::string::npos);
  for (const auto& row : trace.rows) {
    CHECK(std::isfinite(row.loss));
    CHECK(row.accuracy >= 0.0);
    CHECK(row.accuracy <= 1.0);
  }
}

TEST_CASE("monte carlo summary is consistent and independent of thread count") {
  const auto c = small_config();
  const std::vector<int> ks{1, 5};
  const auto one = rasba::run_monte_carlo(c, 200, ks, 1);
  const auto many = rasba::run_monte_carlo(c, 200, ks, 3);
  REQUIRE(one.size() == 2);
  CHECK(rasba::monte_carlo_to_csv(one) == rasba::monte_carlo_to_csv(many));
  for (const auto& s : one) {
    CHECK(s.seeds == 200);
    CHECK(s.exact_fraction == 1.0);
    CHECK(s.oracle_batch == 64);
    CHECK(s.ci95_low <= s.mean_rounds);
    CHECK(s.mean_rounds <= s.ci95_high);
    CHECK(s.median_rounds <= s.p95_rounds);
    CHECK(s.p95_rounds <= s.max_rounds);
  }
  CHECK(one[1].mean_rounds < one[0].mean_rounds);
  const std::vector<int> bad{11};
  CHECK_THROWS_AS(rasba::run_monte_carlo(c, 10, bad, 1), std::invalid_argument);
}
