#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rasba/search_protocol.hpp"

namespace rasba {

/// A config problem, tied to the offending key and, when known, its line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, int line, const std::string& message);

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

/// Everything an experiment needs. Defaults reproduce the shipped
/// configs/default.cfg: 10 clients, f = 0.5, window [4, 64], 25 rounds,
/// Dirichlet alpha = 10, one local epoch.
struct ExperimentConfig {
  // federation
  int m = 10;
  double f = 0.5;
  BatchSize b_min = 4;
  BatchSize b_max = 64;
  std::uint64_t seed = 42;
  Strategy strategy;
  int rounds = 25;

  // trainer
  double alpha = 10.0;
  double lr = 0.1;
  int epochs = 1;
  int classes = 10;
  int dim = 32;
  std::size_t n_train = 10'000;
  std::size_t n_test = 2'000;
  double center_scale = 0.8;
  double noise = 1.0;
  std::size_t min_shard = 256;
  std::string features_csv;  // optional dataset import; both or neither
  std::string labels_csv;
  double test_fraction = 0.2;

  // client hardware
  double mem_fixed_mb = 512.0;
  double mem_per_sample_mb = 12.0;
  std::vector<double> hardware_tiers = {4096.0, 6144.0, 8192.0};  // capacity in MB
  double t_load_s = 3.0e-3;
  double t_fixed_s = 1.4e-3;
  double t_per_sample_s = 1.0e-4;

  // sweep and Monte Carlo
  std::vector<BatchSize> sweep_batches = {4, 8, 16, 32, 64, 128, 256};
  std::vector<int> mc_searchers = {1, 2, 5, 10};

  FederationConfig federation() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys, duplicate
/// keys and bad values raise ConfigError naming the key and line. Cross-field
/// checks run after parsing (see validate).
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Range and cross-field checks. Throws ConfigError.
void validate(const ExperimentConfig& config);

/// Fully resolved config in the same key = value format, one key per line.
std::string to_config_text(const ExperimentConfig& config);

}  // namespace rasba
