#include "rasba/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rasba {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, int line, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(key, line, "'" + value + "' is not a valid number");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError(key, line, "value must be finite");
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, int line, const std::string& value) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, line, trim(item)));
  if (out.empty()) throw ConfigError(key, line, "list must not be empty");
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ",";
    if constexpr (std::is_floating_point_v<T>) {
      os << fmt_double(xs[i]);
    } else {
      os << xs[i];
    }
  }
  return os.str();
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, int line, const std::string& value)>;

template <typename T, typename Member>
Setter number(Member member) {
  return [member](ExperimentConfig& c, const std::string& k, int line, const std::string& v) {
    c.*member = parse_number<T>(k, line, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"m", number<int>(&ExperimentConfig::m)},
      {"f", number<double>(&ExperimentConfig::f)},
      {"b_min", number<BatchSize>(&ExperimentConfig::b_min)},
      {"b_max", number<BatchSize>(&ExperimentConfig::b_max)},
      {"seed", number<std::uint64_t>(&ExperimentConfig::seed)},
      {"strategy",
       [](ExperimentConfig& c, const std::string& k, int line, const std::string& v) {
         try {
           c.strategy = parse_strategy(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(k, line, e.what());
         }
       }},
      {"rounds", number<int>(&ExperimentConfig::rounds)},
      {"alpha", number<double>(&ExperimentConfig::alpha)},
      {"lr", number<double>(&ExperimentConfig::lr)},
      {"epochs", number<int>(&ExperimentConfig::epochs)},
      {"classes", number<int>(&ExperimentConfig::classes)},
      {"dim", number<int>(&ExperimentConfig::dim)},
      {"n_train", number<std::size_t>(&ExperimentConfig::n_train)},
      {"n_test", number<std::size_t>(&ExperimentConfig::n_test)},
      {"center_scale", number<double>(&ExperimentConfig::center_scale)},
      {"noise", number<double>(&ExperimentConfig::noise)},
      {"min_shard", number<std::size_t>(&ExperimentConfig::min_shard)},
      {"features_csv", [](ExperimentConfig& c, const std::string&, int, const std::string& v) { c.features_csv = v; }},
      {"labels_csv", [](ExperimentConfig& c, const std::string&, int, const std::string& v) { c.labels_csv = v; }},
      {"test_fraction", number<double>(&ExperimentConfig::test_fraction)},
      {"mem_fixed_mb", number<double>(&ExperimentConfig::mem_fixed_mb)},
      {"mem_per_sample_mb", number<double>(&ExperimentConfig::mem_per_sample_mb)},
      {"hardware_tiers",
       [](ExperimentConfig& c, const std::string& k, int line, const std::string& v) {
         c.hardware_tiers = parse_list<double>(k, line, v);
       }},
      {"t_load_s", number<double>(&ExperimentConfig::t_load_s)},
      {"t_fixed_s", number<double>(&ExperimentConfig::t_fixed_s)},
      {"t_per_sample_s", number<double>(&ExperimentConfig::t_per_sample_s)},
      {"sweep_batches",
       [](ExperimentConfig& c, const std::string& k, int line, const std::string& v) {
         c.sweep_batches = parse_list<BatchSize>(k, line, v);
       }},
      {"mc_searchers",
       [](ExperimentConfig& c, const std::string& k, int line, const std::string& v) {
         c.mc_searchers = parse_list<int>(k, line, v);
       }},
  };
  return table;
}

void check(bool ok, const char* key, const std::string& message) {
  if (!ok) throw ConfigError(key, 0, message);
}

}  // namespace

ConfigError::ConfigError(std::string key, int line, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + key +
                         ": " + message),
      key_(std::move(key)),
      line_(line) {}

FederationConfig ExperimentConfig::federation() const {
  FederationConfig fc;
  fc.m = m;
  fc.f = f;
  fc.b_min_init = b_min;
  fc.b_max_init = b_max;
  fc.master_seed = seed;
  fc.strategy = strategy;
  fc.rounds = rounds;
  return fc;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(std::string_view(raw).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(body, line, "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key, line, "unknown key");
    if (!seen.emplace(key, line).second) throw ConfigError(key, line, "duplicate key");
    if (value.empty()) throw ConfigError(key, line, "missing value");
    it->second(config, key, line, value);
  }
  try {
    validate(config);
  } catch (const ConfigError& e) {
    // Point range errors at the line that set the key.
    const auto where = seen.find(e.key());
    if (e.line() == 0 && where != seen.end()) {
      const std::string what = e.what();
      throw ConfigError(e.key(), where->second, what.substr(e.key().size() + 2));
    }
    throw;
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", 0, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void validate(const ExperimentConfig& c) {
  check(c.m >= 1, "m", "must be at least 1");
  check(c.f >= 0.0 && c.f < 1.0, "f", "must lie in [0, 1)");
  check(c.b_min >= 1, "b_min", "must be positive");
  check(c.b_max >= 1, "b_max", "must be positive");
  if (c.b_min > c.b_max) {
    throw ConfigError("b_min", 0,
                      "b_min (" + std::to_string(c.b_min) + ") must not exceed b_max (" +
                          std::to_string(c.b_max) + ")");
  }
  check(c.rounds >= 1, "rounds", "must be at least 1");
  if (c.strategy.kind == StrategyKind::kRasba) {
    check(searcher_count(c.federation()) >= 1, "f", "leaves no searching client (m - ceil(f*m) < 1)");
  }
  check(c.alpha > 0.0, "alpha", "must be positive");
  check(c.lr >= 0.0, "lr", "must be non-negative");
  check(c.epochs >= 1, "epochs", "must be at least 1");
  check(c.classes >= 2, "classes", "must be at least 2");
  check(c.dim >= 1, "dim", "must be at least 1");
  check(c.n_train >= static_cast<std::size_t>(c.classes), "n_train", "must cover every class");
  check(c.n_test >= 1, "n_test", "must be at least 1");
  check(c.center_scale > 0.0, "center_scale", "must be positive");
  check(c.noise > 0.0, "noise", "must be positive");
  check(c.min_shard >= 1, "min_shard", "must be at least 1");
  if (c.features_csv.empty() != c.labels_csv.empty()) {
    throw ConfigError(c.features_csv.empty() ? "features_csv" : "labels_csv", 0,
                      "features_csv and labels_csv must be given together");
  }
  check(c.test_fraction > 0.0 && c.test_fraction < 1.0, "test_fraction", "must lie in (0, 1)");
  if (c.features_csv.empty()) {
    check(c.n_train >= static_cast<std::size_t>(c.m) * c.min_shard, "min_shard",
          "m * min_shard exceeds n_train");
  }
  check(c.mem_fixed_mb >= 0.0, "mem_fixed_mb", "must be non-negative");
  check(c.mem_per_sample_mb > 0.0, "mem_per_sample_mb", "must be positive");
  for (double tier : c.hardware_tiers) {
    check(tier >= c.mem_fixed_mb + c.mem_per_sample_mb, "hardware_tiers",
          "every tier must hold the model plus a batch of one");
  }
  check(!c.hardware_tiers.empty(), "hardware_tiers", "must not be empty");
  check(c.t_load_s > 0.0, "t_load_s", "must be positive");
  check(c.t_fixed_s >= 0.0, "t_fixed_s", "must be non-negative");
  check(c.t_per_sample_s > 0.0, "t_per_sample_s", "must be positive");
  for (BatchSize b : c.sweep_batches) check(b >= 1, "sweep_batches", "batch sizes must be positive");
  for (int k : c.mc_searchers) {
    check(k >= 1 && k <= c.m, "mc_searchers", "searcher counts must lie in [1, m]");
  }
}

std::string to_config_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "m = " << c.m << "\n"
     << "f = " << fmt_double(c.f) << "\n"
     << "b_min = " << c.b_min << "\n"
     << "b_max = " << c.b_max << "\n"
     << "seed = " << c.seed << "\n"
     << "strategy = " << c.strategy.label() << "\n"
     << "rounds = " << c.rounds << "\n"
     << "alpha = " << fmt_double(c.alpha) << "\n"
     << "lr = " << fmt_double(c.lr) << "\n"
     << "epochs = " << c.epochs << "\n"
     << "classes = " << c.classes << "\n"
     << "dim = " << c.dim << "\n"
     << "n_train = " << c.n_train << "\n"
     << "n_test = " << c.n_test << "\n"
     << "center_scale = " << fmt_double(c.center_scale) << "\n"
     << "noise = " << fmt_double(c.noise) << "\n"
     << "min_shard = " << c.min_shard << "\n";
  if (!c.features_csv.empty()) {
    os << "features_csv = " << c.features_csv << "\n"
       << "labels_csv = " << c.labels_csv << "\n";
  }
  os << "test_fraction = " << fmt_double(c.test_fraction) << "\n"
     << "mem_fixed_mb = " << fmt_double(c.mem_fixed_mb) << "\n"
     << "mem_per_sample_mb = " << fmt_double(c.mem_per_sample_mb) << "\n"
     << "hardware_tiers = " << join(c.hardware_tiers) << "\n"
     << "t_load_s = " << fmt_double(c.t_load_s) << "\n"
     << "t_fixed_s = " << fmt_double(c.t_fixed_s) << "\n"
     << "t_per_sample_s = " << fmt_double(c.t_per_sample_s) << "\n"
     << "sweep_batches = " << join(c.sweep_batches) << "\n"
     << "mc_searchers = " << join(c.mc_searchers) << "\n";
  return os.str();
}

}  // namespace rasba
