#pragma once

#include <cstdint>
#include <random>

namespace dcign {

using Rng = std::mt19937_64;

// Draws are built straight from engine bits so that sequences are identical
// across standard library implementations.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
// Box-Muller; consumes two engine outputs per call, no cached second value.
double standard_normal(Rng& rng);

// splitmix64 finalizer; derives independent per-stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace dcign
