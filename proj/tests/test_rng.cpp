#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "swpdmod/errors.hpp"
#include "swpdmod/rng.hpp"

using namespace swpdmod;

// Frozen stream values, computed once from the (seed + golden-ratio step,
// SplitMix64 finalize) definition with 64-bit integer arithmetic. Any change
// to the generator invalidates every seeded artifact, so these pin it down.
TEST_CASE("counter values are frozen") {
  CHECK(counter_value(1, 0) == 10451216379200822465ull);
  CHECK(counter_value(1, 1) == 13757245211066428519ull);
  CHECK(counter_value(42, 7) == 14769051326987775908ull);
}

TEST_CASE("uniform01 matches the frozen stream and stays in (0,1]") {
  CHECK(uniform01(1, 0) == doctest::Approx(0.566561575172281).epsilon(1e-15));
  CHECK(uniform01(9, 3) == doctest::Approx(0.784813692465098).epsilon(1e-15));
  for (uint64_t k = 0; k < 10000; ++k) {
    const double u = uniform01(7, k);
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("gaussian matches the frozen stream") {
  CHECK(gaussian(1, 0) == doctest::Approx(-0.028249746095854695).epsilon(1e-12));
  CHECK(gaussian(1, 1) == doctest::Approx(-0.22791952286763478).epsilon(1e-12));
  CHECK(gaussian(123, 5) == doctest::Approx(0.6472862175241642).epsilon(1e-12));
}

TEST_CASE("gaussian sample moments over 1e5 draws") {
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double g = gaussian(99, static_cast<uint64_t>(k));
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  // Frozen values double as a cross-implementation determinism check.
  CHECK(mean == doctest::Approx(0.00039454096577221884).epsilon(1e-6));
  CHECK(var == doctest::Approx(0.9990954948155477).epsilon(1e-6));
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("substreams are frozen and decorrelated from the base stream") {
  CHECK(substream(1, 2) == 7755854262740567548ull);
  CHECK(substream(7, 0) == 13225839796362995591ull);
  CHECK(substream(1, 0) != substream(1, 1));
  CHECK(substream(1, 0) != 1ull);
  // Identical draws from different substreams should not collide.
  CHECK(uniform01(substream(3, 0), 0) != uniform01(substream(3, 1), 0));
}

TEST_CASE("uniform_below is frozen, bounded, and roughly uniform") {
  CHECK(uniform_below(5, 0, 10) == 3);
  CHECK(uniform_below(5, 1, 10) == 7);
  CHECK(uniform_below(5, 2, 3) == 0);

  std::vector<int> counts(8, 0);
  const int n = 80000;
  for (int k = 0; k < n; ++k) {
    const uint64_t v = uniform_below(11, static_cast<uint64_t>(k), 8);
    REQUIRE(v < 8);
    ++counts[static_cast<size_t>(v)];
  }
  for (int c : counts) {
    CHECK(c > n / 8 - 600);
    CHECK(c < n / 8 + 600);
  }

  CHECK_THROWS_AS(uniform_below(1, 0, 0), DomainError);
}

TEST_CASE("draws are pure functions of seed and counter") {
  for (uint64_t k = 0; k < 64; ++k) {
    CHECK(counter_value(123456789, k) == counter_value(123456789, k));
    CHECK(gaussian(42, k) == gaussian(42, k));
  }
  CHECK(counter_value(1, 5) != counter_value(2, 5));
}
