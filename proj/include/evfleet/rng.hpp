#pragma once

#include <cstdint>
#include <random>

namespace evfleet {

// All stochastic draws in the simulator go through one of these, seeded from
// the run configuration.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace evfleet
