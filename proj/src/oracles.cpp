#include "mrlab/oracles.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mrlab {

namespace {

SubsetWitness brute(const std::vector<double>& sizes, double lo, double hi, std::optional<int> cardinality) {
  if (sizes.size() > 24) throw std::invalid_argument("brute_subset_range: more than 24 elements");
  const std::uint32_t n = static_cast<std::uint32_t>(sizes.size());
  for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << n); ++mask) {
    if (cardinality && std::popcount(mask) != *cardinality) continue;
    double sum = 0;
    for (std::uint32_t bits = mask; bits; bits &= bits - 1) sum += sizes[static_cast<std::size_t>(std::countr_zero(bits))];
    if (lo <= sum && sum <= hi) return {true, mask};
  }
  return {};
}

}  // namespace

SubsetWitness brute_subset_range(const std::vector<Tick>& sizes, Tick lo, Tick hi, std::optional<int> cardinality) {
  if (sizes.size() > 24) throw std::invalid_argument("brute_subset_range: more than 24 elements");
  // Gray-code walk: one element flips per step, so the running sum stays exact
  const std::uint32_t total = std::uint32_t{1} << sizes.size();
  std::uint32_t mask = 0;
  Tick sum = 0;
  for (std::uint32_t step = 0;; ++step) {
    if ((!cardinality || std::popcount(mask) == *cardinality) && lo <= sum && sum <= hi) return {true, mask};
    if (step + 1 == total) break;
    const auto bit = static_cast<std::size_t>(std::countr_zero(step + 1));
    mask ^= std::uint32_t{1} << bit;
    sum += (mask >> bit & 1) ? sizes[bit] : -sizes[bit];
  }
  return {};
}

SubsetWitness brute_subset_range(const std::vector<double>& sizes, double lo, double hi,
                                 std::optional<int> cardinality) {
  return brute(sizes, lo, hi, cardinality);
}

McEstimate mc_subset_theorem(std::uint64_t n, std::uint64_t trials, std::uint64_t seed, std::optional<double> width) {
  if (n < 2) throw std::invalid_argument("mc_subset_theorem: n must be at least 2");
  const double lg = std::log2(static_cast<double>(n));
  const int m = 2 * static_cast<int>(std::ceil(lg / 2));
  const double w = width.value_or(lg / static_cast<double>(n));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(1.0, 2.0);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  McEstimate est;
  est.trials = trials;
  std::vector<double> x(static_cast<std::size_t>(m));
  for (std::uint64_t t = 0; t < trials; ++t) {
    for (auto& v : x) v = draw(rng);
    const double y = 0.75 * m + shift(rng);
    if (brute_subset_range(x, y - w, y, m / 2).exists) ++est.hits;
  }
  return est;
}

McEstimate mc_discrete_threshold(std::int64_t N, std::int64_t y, std::uint64_t trials, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("mc_discrete_threshold: N must be positive");
  const std::int64_t lo = (N + 3) / 4;
  const std::int64_t hi = (N + 2) / 3;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> step(lo, hi);
  McEstimate est;
  est.trials = trials;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::int64_t s = 0;
    do s += step(rng);
    while (s < y);
    if (s == y) ++est.hits;
  }
  return est;
}

McEstimate mc_continuous_threshold(double W, double a, double b, std::uint64_t trials, std::uint64_t seed) {
  if (!(W > 0) || a < 0 || !(a < b)) throw std::invalid_argument("mc_continuous_threshold: need W > 0, 0 <= a < b");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> step(W / 2, W);
  McEstimate est;
  est.trials = trials;
  for (std::uint64_t t = 0; t < trials; ++t) {
    double s = 0;
    do s += step(rng);
    while (s < a);
    if (s <= b) ++est.hits;
  }
  return est;
}

std::vector<McEstimate> mc_discrete_sweep(std::int64_t N, std::int64_t y_max, std::uint64_t trials,
                                          std::uint64_t seed) {
  if (N < 1 || y_max < 1) throw std::invalid_argument("mc_discrete_sweep: N and y_max must be positive");
  const std::int64_t lo = (N + 3) / 4;
  const std::int64_t hi = (N + 2) / 3;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> step(lo, hi);
  std::vector<McEstimate> out(static_cast<std::size_t>(y_max) + 1);
  for (auto& e : out) e.trials = trials;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::int64_t s = step(rng);
    while (s <= y_max) {
      ++out[static_cast<std::size_t>(s)].hits;
      s += step(rng);
    }
  }
  return out;
}

Rational potential_phi(const std::vector<PhiKind>& kinds) {
  Rational phi = 0;
  std::int64_t b = 0;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (kinds[i] == PhiKind::B) ++b;
    phi += Rational(b, static_cast<std::int64_t>(i + 1));
  }
  return phi;
}

Rational harmonic(std::size_t n) {
  Rational h = 0;
  for (std::size_t i = 1; i <= n; ++i) h += Rational(1, static_cast<std::int64_t>(i));
  return h;
}

}  // namespace mrlab
