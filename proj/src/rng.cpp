#include "rasba/rng.hpp"

#include <array>

namespace rasba {

namespace {

std::uint32_t low(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t high(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

}  // namespace

Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t client, std::uint64_t round) {
  std::seed_seq seq{low(seed),   high(seed),   static_cast<std::uint32_t>(tag),
                    low(client), high(client), low(round),
                    high(round)};
  return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace rasba
