#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "mrlab/core.hpp"

namespace mrlab {

enum class SizeLaw { Uniform, LogUniform };

struct LowerBoundWorkload {};

struct RandomItemWorkload {
  Tick delta = 0;
};

struct FuzzWorkload {
  Tick size_lo = 0;
  Tick size_hi = 0;
  double target_load = 0.9;
  SizeLaw law = SizeLaw::Uniform;
};

struct WorkloadSpec {
  std::variant<LowerBoundWorkload, RandomItemWorkload, FuzzWorkload> kind;
  std::size_t num_updates = 0;
  std::uint64_t seed = 0;
};

/// n inserts of s1 = ε^(1/2)+2ε, then n rounds of (delete oldest A, insert s2 = ε^(1/2)),
/// with n = ε^(-1/2)/4. Requires ε = 4^-k with k >= 2.
std::vector<UpdateEvent> gen_lower_bound(const TickConfig& cfg);

/// ⌊δ⁻¹/4⌋ inserts with sizes uniform on [δ, 2δ], then alternating insert / delete of a
/// uniformly random present item.
std::vector<UpdateEvent> gen_random_item(const WorkloadSpec& spec, const TickConfig& cfg);

/// Random inserts and deletes holding the present mass near target_load.
std::vector<UpdateEvent> gen_fuzz(const WorkloadSpec& spec, const TickConfig& cfg);

std::vector<UpdateEvent> generate(const WorkloadSpec& spec, const TickConfig& cfg);

}  // namespace mrlab
