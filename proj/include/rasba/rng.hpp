#pragma once

#include <cstdint>
#include <random>

namespace rasba {

using Rng = std::mt19937_64;

// Independent stream purposes. Keeping search and training streams apart means
// a search-only run follows the same bound trajectory as a full training run.
enum class StreamTag : std::uint32_t {
  kRoles = 1,
  kProbe = 2,
  kTraining = 3,
  kPartition = 4,
  kDataset = 5,
  kProfiles = 6,
  kMonteCarlo = 7,
};

// Deterministic stream keyed by (seed, tag, client, round). std::seed_seq has a
// fully specified algorithm, so the mapping is stable across toolchains.
Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t client = 0,
                std::uint64_t round = 0);

// Derives the seed of the i-th run in an ensemble.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

}  // namespace rasba
