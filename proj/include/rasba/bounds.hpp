#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "rasba/rng.hpp"

namespace rasba {

using BatchSize = std::int64_t;

/// Server-side knowledge about the shared batch size.
///
/// `lo` is the largest batch believed to succeed on every client and `hi` is
/// the smallest batch known to fail on at least one client (exclusive). The
/// search is over once no integer lies strictly between them; the shared batch
/// is then `lo`.
class BoundsState {
 public:
  BoundsState(BatchSize lo, BatchSize hi);

  BatchSize lo() const { return lo_; }
  BatchSize hi() const { return hi_; }
  BatchSize width() const { return hi_ - lo_; }
  bool converged() const { return hi_ - lo_ == 1; }

  // True when `b` lies in the open probe window (lo, hi).
  bool contains(BatchSize b) const { return lo_ < b && b < hi_; }

  std::string to_string() const;

  friend bool operator==(const BoundsState&, const BoundsState&) = default;

 private:
  BatchSize lo_;
  BatchSize hi_;
};

struct ProbeOutcome {
  BatchSize probed_batch;
  bool succeeded;

  friend bool operator==(const ProbeOutcome&, const ProbeOutcome&) = default;
};

/// Initial window. `b_max_init` is itself a candidate, so the exclusive upper
/// bound sits one above it; the smallest client dataset is a hard ceiling.
/// Throws std::invalid_argument when no feasible window remains.
BoundsState init_bounds(BatchSize b_min_init, BatchSize b_max_init, BatchSize min_dataset_size);

/// Uniform draw from [lo + 1, hi - 1]. Every probe is informative.
/// Throws std::logic_error on a converged state.
BatchSize sample_probe(const BoundsState& state, Rng& rng);

/// Success raises lo to the probe, failure lowers hi to it.
/// Throws std::invalid_argument if the probe lies outside the open window.
BoundsState apply_outcome(const BoundsState& state, const ProbeOutcome& outcome);

/// Server merge of client reports: hi is the smallest reported hi, lo the
/// largest reported lo that is still below it. When reports conflict (one
/// client succeeded at or above a batch another failed at) failure evidence
/// wins and the reports above the failing batch are ignored for lo.
/// Order of `reports` does not matter. Throws std::invalid_argument if empty.
BoundsState merge(std::span<const BoundsState> reports);

}  // namespace rasba
