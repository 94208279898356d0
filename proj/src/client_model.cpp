#include "rasba/client_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rasba {

namespace {

// Absorbs rounding in capacity arithmetic, e.g. 7680 / 51.2.
constexpr double kRelTol = 1e-12;

bool fits(const ClientProfile& p, BatchSize b) {
  return memory_usage_mb(p, b) <= p.mem_capacity_mb * (1.0 + kRelTol);
}

void require(bool ok, const ClientProfile& p, const char* what) {
  if (!ok) {
    throw std::invalid_argument("client " + std::to_string(p.id) + ": " + what);
  }
}

}  // namespace

void validate(const ClientProfile& p) {
  require(p.n_samples >= 1, p, "n_samples must be positive");
  require(std::isfinite(p.mem_capacity_mb) && p.mem_capacity_mb > 0, p,
          "mem_capacity_mb must be positive and finite");
  require(std::isfinite(p.mem_model_fixed_mb) && p.mem_model_fixed_mb >= 0, p,
          "mem_model_fixed_mb must be non-negative and finite");
  require(std::isfinite(p.mem_per_sample_mb) && p.mem_per_sample_mb > 0, p,
          "mem_per_sample_mb must be positive and finite");
  require(std::isfinite(p.t_load_s) && p.t_load_s > 0, p, "t_load_s must be positive and finite");
  require(std::isfinite(p.t_fixed_s) && p.t_fixed_s >= 0, p,
          "t_fixed_s must be non-negative and finite");
  require(std::isfinite(p.t_per_sample_s) && p.t_per_sample_s > 0, p,
          "t_per_sample_s must be positive and finite");
  require(fits(p, 1), p, "memory capacity cannot hold the model plus a batch of one");
}

ClientProfile make_profile(int id, BatchSize n_samples, double mem_capacity_mb,
                           double mem_model_fixed_mb, double mem_per_sample_mb, double t_load_s,
                           double t_fixed_s, double t_per_sample_s) {
  ClientProfile p{id,        n_samples, mem_capacity_mb, mem_model_fixed_mb, mem_per_sample_mb,
                  t_load_s, t_fixed_s, t_per_sample_s};
  validate(p);
  return p;
}

double memory_usage_mb(const ClientProfile& p, BatchSize b) {
  return p.mem_model_fixed_mb + p.mem_per_sample_mb * static_cast<double>(b);
}

TryResult try_batch(const ClientProfile& p, BatchSize b) {
  if (b < 1) throw std::invalid_argument("batch size must be positive");
  if (b > p.n_samples) return TryResult::kOutOfMemory;
  return fits(p, b) ? TryResult::kSuccess : TryResult::kOutOfMemory;
}

BatchSize max_feasible_batch(const ClientProfile& p) {
  const double room = (p.mem_capacity_mb - p.mem_model_fixed_mb) / p.mem_per_sample_mb;
  auto b = static_cast<BatchSize>(std::floor(std::min(room, static_cast<double>(p.n_samples) + 1)));
  // Settle the floor against the exact feasibility test.
  while (b > 1 && !fits(p, b)) --b;
  while (fits(p, b + 1) && b + 1 <= p.n_samples) ++b;
  return std::max<BatchSize>(1, std::min(b, p.n_samples));
}

double epoch_time(const ClientProfile& p, BatchSize b) {
  if (b < 1 || b > p.n_samples) {
    throw std::invalid_argument("epoch_time: batch " + std::to_string(b) + " outside [1, " +
                                std::to_string(p.n_samples) + "]");
  }
  const BatchSize batches = (p.n_samples + b - 1) / b;
  return static_cast<double>(batches) * (p.t_load_s + p.t_fixed_s) +
         static_cast<double>(p.n_samples) * p.t_per_sample_s;
}

double failed_attempt_time(const ClientProfile& p) { return p.t_load_s + p.t_fixed_s; }

}  // namespace rasba
