#pragma once

#include <cstdint>
#include <random>

namespace mia {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for stream `stream` of a run seeded with `seed`. Parallel and serial
/// callers that derive their generators this way draw identical numbers.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng{derive_seed(seed, stream)};
}

}  // namespace mia
