#include "swpdmod/rng.hpp"

#include <cmath>

#include "swpdmod/errors.hpp"

namespace swpdmod {

namespace {
constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

uint64_t counter_value(uint64_t seed, uint64_t counter) {
  // counter+1 so that counter 0 never degenerates to mixing the bare seed.
  return mix64(seed + (counter + 1) * kGolden);
}

double uniform01(uint64_t seed, uint64_t counter) {
  // Top 53 bits, shifted into (0,1]: the +1 keeps 0 out of the range.
  return static_cast<double>((counter_value(seed, counter) >> 11) + 1) * 0x1.0p-53;
}

double gaussian(uint64_t seed, uint64_t counter) {
  const double u1 = uniform01(seed, 2 * counter);
  const double u2 = uniform01(seed, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

uint64_t substream(uint64_t seed, uint64_t tag) {
  return mix64(mix64(seed) ^ mix64(tag));
}

uint64_t uniform_below(uint64_t seed, uint64_t counter, uint64_t bound) {
  if (bound == 0) throw DomainError("uniform_below: bound must be positive");
  const auto wide = static_cast<unsigned __int128>(counter_value(seed, counter));
  return static_cast<uint64_t>((wide * bound) >> 64);
}

}  // namespace swpdmod
