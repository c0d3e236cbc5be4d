#include <bit>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mrlab/oracles.hpp"
#include "mrlab/rsum.hpp"

using namespace mrlab;

namespace {

double three_sigma(double p, std::uint64_t trials) { return 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(trials)); }

Tick witness_sum(const std::vector<Tick>& s, std::uint32_t mask) {
  Tick z = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (mask >> i & 1) z += s[i];
  return z;
}

}  // namespace

TEST_CASE("brute subset range") {
  auto w = brute_subset_range(std::vector<Tick>{5, 7}, 12, 12);
  CHECK(w.exists);
  CHECK(w.mask == 3);
  CHECK(!brute_subset_range(std::vector<Tick>{}, 1, 2).exists);
  CHECK(brute_subset_range(std::vector<Tick>{}, 0, 2).exists);
  CHECK(brute_subset_range(std::vector<Tick>{1, 2, 3}, 3, 3, 1).mask == 4);
  CHECK(brute_subset_range(std::vector<Tick>{1, 2, 3}, 3, 3, 2).mask == 3);
  CHECK(!brute_subset_range(std::vector<Tick>{1, 2, 3}, 3, 3, 3).exists);
  CHECK(brute_subset_range(std::vector<double>{1.5, 1.25}, 2.7, 2.8).exists);
  CHECK(!brute_subset_range(std::vector<double>{1.5, 1.25}, 2.7, 2.8, 1).exists);
  CHECK_THROWS_AS(brute_subset_range(std::vector<Tick>(25, 1), 0, 1), std::invalid_argument);
}

TEST_CASE("brute force agrees with meet-in-the-middle") {
  std::mt19937_64 rng(8);
  for (int q = 0; q < 200; ++q) {
    std::vector<Tick> s(20);
    for (auto& x : s) x = std::uniform_int_distribution<Tick>(1 << 20, 1 << 21)(rng);
    const Tick lo = std::uniform_int_distribution<Tick>(0, 20 << 21)(rng);
    const Tick hi = lo + std::uniform_int_distribution<Tick>(0, 1 << 8)(rng);
    const auto b = brute_subset_range(s, lo, hi);
    const auto m = subset_sum_in_range(s, lo, hi);
    REQUIRE(b.exists == m.has_value());
    if (b.exists) {
      CHECK(lo <= witness_sum(s, b.mask));
      CHECK(witness_sum(s, b.mask) <= hi);
    }
  }
}

TEST_CASE("discrete threshold") {
  const std::int64_t N = 512;
  const std::int64_t lo = 128, hi = 171;  // ⌈N/4⌉, ⌈N/3⌉
  CHECK(mc_discrete_threshold(N, lo - 1, 2000, 1).hits == 0);
  // only the first step can reach ⌈N/4⌉
  const auto first = mc_discrete_threshold(N, lo, 20000, 2);
  const double p = 1.0 / static_cast<double>(hi - lo + 1);
  CHECK(std::abs(first.frequency() - p) <= three_sigma(p, first.trials));

  SUBCASE("sweep matches single runs in law") {
    const auto sweep = mc_discrete_sweep(N, 10 * N, 4000, 3);
    CHECK(sweep[static_cast<std::size_t>(lo - 1)].hits == 0);
    for (std::int64_t y : {lo, 300L, 1000L, 4000L}) {
      const auto one = mc_discrete_threshold(N, y, 4000, 4 + static_cast<std::uint64_t>(y));
      const double a = sweep[static_cast<std::size_t>(y)].frequency();
      const double b = one.frequency();
      const double pooled = (a + b) / 2;
      CHECK(std::abs(a - b) <= 4 * std::sqrt(2 * pooled * (1 - pooled) / 4000.0) + 1e-12);
    }
  }

  SUBCASE("hitting bound") {
    for (std::int64_t n : {128, 512}) {
      const auto sweep = mc_discrete_sweep(n, 10 * n, 10000, 5 + static_cast<std::uint64_t>(n));
      const double bound = 100.0 / static_cast<double>(n);
      double worst = 0;
      for (std::size_t y = 1; y < sweep.size(); ++y) worst = std::max(worst, sweep[y].frequency());
      CHECK(worst <= bound + three_sigma(std::min(bound, 1.0), 10000));
    }
  }
}

TEST_CASE("continuous threshold") {
  // a first draw exceeds W/2, so nothing below that is reachable
  CHECK(mc_continuous_threshold(1.0, 0.1, 0.4, 2000, 1).hits == 0);
  CHECK(mc_continuous_threshold(1.0, 0.0, 0.01, 2000, 1).hits == 0);
  const double bound = 4 * 0.01;
  double worst = 0;
  for (int q = 0; q < 200; ++q) {
    const double a = 0.05 * q;
    worst = std::max(worst, mc_continuous_threshold(1.0, a, a + 0.01, 10000, 10 + q).frequency());
  }
  CHECK(worst <= bound + three_sigma(bound, 10000));
  // an interval of one full step width is always hit once past the start
  CHECK(mc_continuous_threshold(1.0, 3.0, 4.0, 1000, 2).hits == 1000);
  CHECK_THROWS_AS(mc_continuous_threshold(1.0, 0.5, 0.5, 10, 1), std::invalid_argument);
}

TEST_CASE("subset theorem") {
  for (std::uint64_t n : {std::uint64_t{1} << 8, std::uint64_t{1} << 12}) {
    CAPTURE(n);
    const auto est = mc_subset_theorem(n, 2000, n);
    MESSAGE("n=" << n << " success=" << est.frequency());
    CHECK(est.frequency() >= 0.05);
  }
  // same seed, same draws: widening the window can only add hits
  const auto narrow = mc_subset_theorem(1 << 8, 500, 3);
  const auto wide = mc_subset_theorem(1 << 8, 500, 3, 1.0);
  CHECK(wide.hits >= narrow.hits);
  CHECK(wide.frequency() > 0.5);
}

TEST_CASE("potential function") {
  using K = PhiKind;
  CHECK(potential_phi({K::A, K::A, K::A}) == 0);
  CHECK(potential_phi({K::B, K::B, K::B, K::B}) == 4);
  CHECK(potential_phi({K::A, K::B}) == Rational(1, 2));
  CHECK(potential_phi({K::B, K::A}) == Rational(3, 2));
  CHECK(harmonic(4) == Rational(25, 12));
  std::mt19937_64 rng(6);
  for (std::size_t n : {1, 2, 7, 40, 200}) {
    std::vector<K> kinds(n);
    for (auto& k : kinds) k = rng() & 1 ? K::B : K::A;
    kinds[0] = K::A;
    auto flipped = kinds;
    flipped[0] = K::B;
    CHECK(potential_phi(flipped) - potential_phi(kinds) == harmonic(n));
    CHECK(potential_phi(std::vector<K>(n, K::B)) == static_cast<long long>(n));
  }
}
