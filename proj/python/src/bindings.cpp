#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "rasba/harness.hpp"

namespace py = pybind11;
using namespace rasba;

namespace {

// Strategies cross the boundary as their labels: "rasba", "single_prober", "fixed(64)".
template <class T>
void strategy_property(py::class_<T>& cls) {
  cls.def_property(
      "strategy", [](const T& c) { return c.strategy.label(); },
      [](T& c, const std::string& s) { c.strategy = parse_strategy(s); });
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Collaborative batch-size search for federated learning (simulator core)";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NonFiniteLoss>(m, "NonFiniteLoss", PyExc_RuntimeError);

  m.attr("TRACE_HEADER") = kTraceHeader;
  m.attr("SWEEP_HEADER") = kSweepHeader;
  m.attr("MONTE_CARLO_HEADER") = kMonteCarloHeader;

  // bounds
  py::class_<BoundsState>(m, "BoundsState")
      .def(py::init<BatchSize, BatchSize>(), py::arg("lo"), py::arg("hi"))
      .def_property_readonly("lo", &BoundsState::lo)
      .def_property_readonly("hi", &BoundsState::hi)
      .def_property_readonly("width", &BoundsState::width)
      .def_property_readonly("converged", &BoundsState::converged)
      .def("contains", &BoundsState::contains, py::arg("b"))
      .def("__eq__", [](const BoundsState& a, const BoundsState& b) { return a == b; })
      .def("__repr__", [](const BoundsState& b) { return "BoundsState" + b.to_string(); });

  py::class_<ProbeOutcome>(m, "ProbeOutcome")
      .def(py::init<BatchSize, bool>(), py::arg("probed_batch"), py::arg("succeeded"))
      .def_readwrite("probed_batch", &ProbeOutcome::probed_batch)
      .def_readwrite("succeeded", &ProbeOutcome::succeeded);

  m.def("init_bounds", &init_bounds, py::arg("b_min"), py::arg("b_max"), py::arg("min_dataset_size"));
  m.def(
      "sample_probe",
      [](const BoundsState& bounds, std::uint64_t seed) {
        Rng rng(seed);
        return sample_probe(bounds, rng);
      },
      py::arg("bounds"), py::arg("seed"), "Uniform draw from the open window (lo, hi).");
  m.def("apply_outcome", &apply_outcome, py::arg("bounds"), py::arg("outcome"));
  m.def(
      "merge", [](const std::vector<BoundsState>& reports) { return merge(reports); }, py::arg("reports"));

  // client model
  py::class_<ClientProfile>(m, "ClientProfile")
      .def(py::init<>())
      .def_readwrite("id", &ClientProfile::id)
      .def_readwrite("n_samples", &ClientProfile::n_samples)
      .def_readwrite("mem_capacity_mb", &ClientProfile::mem_capacity_mb)
      .def_readwrite("mem_model_fixed_mb", &ClientProfile::mem_model_fixed_mb)
      .def_readwrite("mem_per_sample_mb", &ClientProfile::mem_per_sample_mb)
      .def_readwrite("t_load_s", &ClientProfile::t_load_s)
      .def_readwrite("t_fixed_s", &ClientProfile::t_fixed_s)
      .def_readwrite("t_per_sample_s", &ClientProfile::t_per_sample_s);

  m.def("make_profile", &make_profile, py::arg("id"), py::arg("n_samples"), py::arg("mem_capacity_mb"),
        py::arg("mem_model_fixed_mb"), py::arg("mem_per_sample_mb"), py::arg("t_load_s"), py::arg("t_fixed_s"),
        py::arg("t_per_sample_s"));
  m.def(
      "try_batch", [](const ClientProfile& p, BatchSize b) { return try_batch(p, b) == TryResult::kSuccess; },
      py::arg("profile"), py::arg("b"), "True if the batch fits in memory, False on simulated OOM.");
  m.def("max_feasible_batch", &max_feasible_batch, py::arg("profile"));
  m.def("memory_usage_mb", &memory_usage_mb, py::arg("profile"), py::arg("b"));
  m.def("epoch_time", &epoch_time, py::arg("profile"), py::arg("b"));
  m.def("failed_attempt_time", &failed_attempt_time, py::arg("profile"));

  // search protocol
  py::class_<FederationConfig> fed(m, "FederationConfig");
  fed.def(py::init<>())
      .def_readwrite("m", &FederationConfig::m)
      .def_readwrite("f", &FederationConfig::f)
      .def_readwrite("b_min_init", &FederationConfig::b_min_init)
      .def_readwrite("b_max_init", &FederationConfig::b_max_init)
      .def_readwrite("master_seed", &FederationConfig::master_seed)
      .def_readwrite("rounds", &FederationConfig::rounds)
      .def_readwrite("run_until_stable", &FederationConfig::run_until_stable);
  strategy_property(fed);

  py::class_<TraceRow>(m, "TraceRow")
      .def_readonly("round", &TraceRow::round)
      .def_readonly("sim_time_s", &TraceRow::sim_time_s)
      .def_readonly("lo", &TraceRow::lo)
      .def_readonly("hi", &TraceRow::hi)
      .def_readonly("oom_events", &TraceRow::oom_events)
      .def_readonly("updates", &TraceRow::updates)
      .def_readonly("loss", &TraceRow::loss)
      .def_readonly("accuracy", &TraceRow::accuracy)
      .def_readonly("searching", &TraceRow::searching)
      .def_readonly("round_time_s", &TraceRow::round_time_s);

  py::class_<ExperimentTrace>(m, "ExperimentTrace")
      .def_readonly("label", &ExperimentTrace::label)
      .def_readonly("initial", &ExperimentTrace::initial)
      .def_readonly("rows", &ExperimentTrace::rows)
      .def_property_readonly("total_time", &ExperimentTrace::total_time)
      .def_property_readonly("final_accuracy", &ExperimentTrace::final_accuracy)
      .def_property_readonly("converged", &ExperimentTrace::converged)
      .def_property_readonly("converged_batch", &ExperimentTrace::converged_batch)
      .def_property_readonly("rounds_to_convergence", &ExperimentTrace::rounds_to_convergence)
      .def("to_csv", &trace_to_csv);

  m.def(
      "run_search",
      [](const FederationConfig& config, const std::vector<ClientProfile>& profiles) {
        return run_search(config, profiles, nullptr);
      },
      py::arg("config"), py::arg("profiles"), py::call_guard<py::gil_scoped_release>(),
      "Search-only simulation: bounds and simulated clock, no model training.");

  // harness
  py::class_<ExperimentConfig> cfg(m, "ExperimentConfig");
  cfg.def(py::init<>())
      .def_readwrite("m", &ExperimentConfig::m)
      .def_readwrite("f", &ExperimentConfig::f)
      .def_readwrite("b_min", &ExperimentConfig::b_min)
      .def_readwrite("b_max", &ExperimentConfig::b_max)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("rounds", &ExperimentConfig::rounds)
      .def_readwrite("alpha", &ExperimentConfig::alpha)
      .def_readwrite("lr", &ExperimentConfig::lr)
      .def_readwrite("epochs", &ExperimentConfig::epochs)
      .def_readwrite("n_train", &ExperimentConfig::n_train)
      .def_readwrite("n_test", &ExperimentConfig::n_test)
      .def_readwrite("min_shard", &ExperimentConfig::min_shard)
      .def_readwrite("hardware_tiers", &ExperimentConfig::hardware_tiers)
      .def_readwrite("t_load_s", &ExperimentConfig::t_load_s)
      .def_readwrite("t_fixed_s", &ExperimentConfig::t_fixed_s)
      .def_readwrite("t_per_sample_s", &ExperimentConfig::t_per_sample_s)
      .def_readwrite("sweep_batches", &ExperimentConfig::sweep_batches)
      .def_readwrite("mc_searchers", &ExperimentConfig::mc_searchers)
      .def("federation", &ExperimentConfig::federation)
      .def("to_text", [](const ExperimentConfig& c) { return to_config_text(c); });
  strategy_property(cfg);

  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("load_config", &load_config, py::arg("path"));
  m.def("validate_config", py::overload_cast<const ExperimentConfig&>(&validate), py::arg("config"));

  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("strategy", &SweepRow::strategy)
      .def_readonly("total_time_s", &SweepRow::total_time_s)
      .def_readonly("speedup", &SweepRow::speedup)
      .def_readonly("final_accuracy", &SweepRow::final_accuracy)
      .def_readonly("rounds_to_convergence", &SweepRow::rounds_to_convergence);

  py::class_<MonteCarloSummary>(m, "MonteCarloSummary")
      .def_readonly("searchers", &MonteCarloSummary::searchers)
      .def_readonly("seeds", &MonteCarloSummary::seeds)
      .def_readonly("mean_rounds", &MonteCarloSummary::mean_rounds)
      .def_readonly("ci95_low", &MonteCarloSummary::ci95_low)
      .def_readonly("ci95_high", &MonteCarloSummary::ci95_high)
      .def_readonly("median_rounds", &MonteCarloSummary::median_rounds)
      .def_readonly("p95_rounds", &MonteCarloSummary::p95_rounds)
      .def_readonly("max_rounds", &MonteCarloSummary::max_rounds)
      .def_readonly("mean_converged_batch", &MonteCarloSummary::mean_converged_batch)
      .def_readonly("oracle_batch", &MonteCarloSummary::oracle_batch)
      .def_readonly("exact_fraction", &MonteCarloSummary::exact_fraction)
      .def_readonly("rounds", &MonteCarloSummary::rounds);

  m.def(
      "run_experiment",
      [](const ExperimentConfig& c, const std::filesystem::path& out) { return run_experiment(c, out); },
      py::arg("config"), py::arg("out_dir"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "run_sweep", [](const ExperimentConfig& c, const std::filesystem::path& out) { return run_sweep(c, out); },
      py::arg("config"), py::arg("out_dir"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "run_monte_carlo",
      [](const ExperimentConfig& c, int n_seeds, const std::vector<int>& searchers, unsigned threads) {
        return run_monte_carlo(c, n_seeds, searchers, threads);
      },
      py::arg("config"), py::arg("n_seeds"), py::arg("searchers"), py::arg("threads") = 0,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "sweep_to_csv", [](const std::vector<SweepRow>& rows) { return sweep_to_csv(rows); }, py::arg("rows"));
  m.def(
      "monte_carlo_to_csv", [](const std::vector<MonteCarloSummary>& rows) { return monte_carlo_to_csv(rows); },
      py::arg("rows"));
}
