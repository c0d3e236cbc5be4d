#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "mrlab/core.hpp"

namespace mrlab {

struct SubsetWitness {
  bool exists = false;
  std::uint32_t mask = 0;  // bit i = element i
};

/// Exhaustive search for a subset with sum in [lo, hi], optionally of a fixed
/// size. At most 24 elements; throws std::invalid_argument otherwise.
SubsetWitness brute_subset_range(const std::vector<Tick>& sizes, Tick lo, Tick hi,
                                 std::optional<int> cardinality = std::nullopt);
SubsetWitness brute_subset_range(const std::vector<double>& sizes, double lo, double hi,
                                 std::optional<int> cardinality = std::nullopt);

struct McEstimate {
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  double frequency() const { return trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0; }
};

/// m = 2⌈log₂(n)/2⌉ uniform [1, 2] draws and y uniform on (3/4)m + [-1, 1];
/// counts trials where some (m/2)-subset sums into [y - width, y]. The default
/// width is log₂(n)/n.
McEstimate mc_subset_theorem(std::uint64_t n, std::uint64_t trials, std::uint64_t seed,
                             std::optional<double> width = std::nullopt);

/// Partial sums (one or more terms) of i.i.d. uniform integers from
/// [⌈N/4⌉, ⌈N/3⌉]; counts trials where some partial sum equals y.
McEstimate mc_discrete_threshold(std::int64_t N, std::int64_t y, std::uint64_t trials, std::uint64_t seed);

/// All y in [0, y_max] at once: entry y counts trials whose path hits y. Each
/// entry has the distribution of mc_discrete_threshold(N, y, ...).
std::vector<McEstimate> mc_discrete_sweep(std::int64_t N, std::int64_t y_max, std::uint64_t trials,
                                          std::uint64_t seed);

/// Partial sums (one or more terms) of i.i.d. uniforms on (W/2, W); counts
/// trials where some partial sum lands in [a, b].
McEstimate mc_continuous_threshold(double W, double a, double b, std::uint64_t trials, std::uint64_t seed);

enum class PhiKind { A, B };

using Rational = boost::multiprecision::cpp_rational;

/// Φ = Σ_{i=1..n} B_i / i where B_i counts B's among the first i entries;
/// entry 0 is the item closest to the end of memory.
Rational potential_phi(const std::vector<PhiKind>& kinds);

/// H_n as an exact fraction.
Rational harmonic(std::size_t n);

}  // namespace mrlab
