#include "rasba/bounds.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace rasba {

BoundsState::BoundsState(BatchSize lo, BatchSize hi) : lo_(lo), hi_(hi) {
  if (lo < 1 || hi <= lo) {
    throw std::invalid_argument("invalid bounds: need 1 <= lo < hi, got " + to_string());
  }
}

std::string BoundsState::to_string() const {
  return "{lo: " + std::to_string(lo_) + ", hi: " + std::to_string(hi_) + "}";
}

BoundsState init_bounds(BatchSize b_min_init, BatchSize b_max_init, BatchSize min_dataset_size) {
  if (b_min_init < 1 || min_dataset_size < 1) {
    throw std::invalid_argument("b_min and the minimum dataset size must be positive");
  }
  if (b_min_init > b_max_init) {
    throw std::invalid_argument("b_min (" + std::to_string(b_min_init) + ") exceeds b_max (" +
                                std::to_string(b_max_init) + ")");
  }
  const BatchSize ceiling = std::min(b_max_init, min_dataset_size);
  if (b_min_init > ceiling) {
    throw std::invalid_argument("b_min (" + std::to_string(b_min_init) +
                                ") exceeds the smallest client dataset (" +
                                std::to_string(min_dataset_size) + ")");
  }
  return BoundsState(b_min_init, ceiling + 1);
}

BatchSize sample_probe(const BoundsState& state, Rng& rng) {
  if (state.converged()) {
    throw std::logic_error("sample_probe called on converged bounds " + state.to_string());
  }
  std::uniform_int_distribution<BatchSize> dist(state.lo() + 1, state.hi() - 1);
  return dist(rng);
}

BoundsState apply_outcome(const BoundsState& state, const ProbeOutcome& outcome) {
  if (!state.contains(outcome.probed_batch)) {
    throw std::invalid_argument("probe " + std::to_string(outcome.probed_batch) +
                                " outside window " + state.to_string());
  }
  if (outcome.succeeded) return BoundsState(outcome.probed_batch, state.hi());
  return BoundsState(state.lo(), outcome.probed_batch);
}

BoundsState merge(std::span<const BoundsState> reports) {
  if (reports.empty()) throw std::invalid_argument("merge of an empty report list");

  BatchSize hi = std::numeric_limits<BatchSize>::max();
  for (const auto& r : reports) hi = std::min(hi, r.hi());

  // The report that set hi has lo < hi, so at least one candidate survives.
  BatchSize lo = 0;
  for (const auto& r : reports) {
    if (r.lo() < hi) lo = std::max(lo, r.lo());
  }
  return BoundsState(lo, hi);
}

}  // namespace rasba
