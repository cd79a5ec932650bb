#pragma once

#include <cstdint>

namespace swpdmod {

// Counter-based PRNG. Every draw is a pure function of (seed, counter), so
// parallel consumers can pull from disjoint counter ranges without shared
// state and streams reproduce bit-exactly across platforms, thread counts,
// and reimplementations in other languages. The mixer is the SplitMix64
// finalizer; gaussians come from Box-Muller on two counters.

// SplitMix64 finalizer (Stafford variant 13).
uint64_t mix64(uint64_t x);

// Raw 64-bit word for a counter position.
uint64_t counter_value(uint64_t seed, uint64_t counter);

// Uniform double in (0, 1]; never 0 so log() is always safe.
double uniform01(uint64_t seed, uint64_t counter);

// Standard normal draw; consumes counters 2k and 2k+1 internally.
double gaussian(uint64_t seed, uint64_t counter);

// Derived seed for an independent substream identified by `tag`.
uint64_t substream(uint64_t seed, uint64_t tag);

// Uniform integer in [0, bound) via the multiply-shift reduction.
uint64_t uniform_below(uint64_t seed, uint64_t counter, uint64_t bound);

}  // namespace swpdmod
