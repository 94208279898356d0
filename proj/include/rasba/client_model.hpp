#pragma once

#include <cstdint>

#include "rasba/bounds.hpp"

namespace rasba {

/// Simulated client hardware. Memory grows linearly with the batch:
/// mem(b) = mem_model_fixed_mb + mem_per_sample_mb * b. Time per local epoch
/// charges a per-batch constant (load + launch) plus per-sample compute.
struct ClientProfile {
  int id = 0;
  BatchSize n_samples = 1;
  double mem_capacity_mb = 0.0;
  double mem_model_fixed_mb = 0.0;
  double mem_per_sample_mb = 0.0;
  double t_load_s = 0.0;
  double t_fixed_s = 0.0;
  double t_per_sample_s = 0.0;
};

/// Throws std::invalid_argument unless every coefficient is finite with the
/// right sign and the client can hold a batch of one.
void validate(const ClientProfile& profile);

/// Convenience constructor that validates.
ClientProfile make_profile(int id, BatchSize n_samples, double mem_capacity_mb,
                           double mem_model_fixed_mb, double mem_per_sample_mb, double t_load_s,
                           double t_fixed_s, double t_per_sample_s);

double memory_usage_mb(const ClientProfile& profile, BatchSize b);

enum class TryResult { kSuccess, kOutOfMemory };

/// Deterministic feasibility check against the memory model.
TryResult try_batch(const ClientProfile& profile, BatchSize b);

/// Ground truth: largest batch that fits in memory, capped by the dataset size.
/// The protocol never consults this; tests and config validation do.
BatchSize max_feasible_batch(const ClientProfile& profile);

/// Simulated seconds for one local epoch at batch `b`.
/// Throws std::invalid_argument unless 1 <= b <= n_samples.
double epoch_time(const ClientProfile& profile, BatchSize b);

/// Cost of an attempt that runs out of memory on its first batch.
double failed_attempt_time(const ClientProfile& profile);

}  // namespace rasba
