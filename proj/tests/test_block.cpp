#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mrlab/block.hpp"
#include "mrlab/runner.hpp"
#include "mrlab/workload.hpp"

using namespace mrlab;

namespace {

// Sizes with x = lo dividing M_ℓ: capacity 8 per tier-ℓ block, 16 per tier ℓ-1.
struct Fixture {
  TickConfig cfg = TickConfig::power_of_four(2);
  BlockParams p = block_sizes(cfg, 0.2);
  Tick M = p.M.back();
  BlockAllocator::Regime reg{M / 8, M / 4};
  BlockAllocator a{cfg, 0.2, reg};
  World w{cfg};
  ItemId next = 0;

  Tick insert(Tick size) {
    const ItemId id = next++;
    return w.apply(UpdateEvent::insert(id, size), a.insert(id, size));
  }
  Tick erase(ItemId id) { return w.apply(UpdateEvent::erase(id), a.erase(id)); }
};

}  // namespace

TEST_CASE("mem-block sizes") {
  auto cfg = TickConfig::power_of_four(2);
  auto p = block_sizes(cfg, 0.2);
  // smallest ℓ > 1 with γ/4 < 1/(ℓ-1) < γ/2, by direct search
  int expect = 0;
  for (int l = 2; l < 1000 && expect == 0; ++l) {
    const double inv = 1.0 / (l - 1);
    if (0.05 < inv && inv < 0.1) expect = l;
  }
  CHECK(p.ell == expect);
  CHECK(p.ell == 12);
  CHECK(p.a == doctest::Approx(2.2));
  for (int k : {2, 3, 4, 5}) {
    auto c = TickConfig::power_of_four(k);
    auto q = block_sizes(c, 0.2);
    REQUIRE(q.M.size() == static_cast<std::size_t>(q.ell));
    CHECK(c.memory() % q.M.front() == 0);
    for (int i = 1; i <= q.ell; ++i) CHECK(std::has_single_bit(static_cast<std::uint64_t>(q.tier_size(i))));
    for (int i = 2; i <= q.ell; ++i) {
      CHECK(q.tier_size(i - 1) % q.tier_size(i) == 0);
      CHECK(q.ratio(i) >= 2);
    }
  }
  // nearest power of two in log scale, pushed down until each ratio is at least 2
  for (int k : {2, 3, 4, 5}) {
    auto c = TickConfig::power_of_four(k);
    auto q = block_sizes(c, 0.2);
    int prev = -1;
    for (int i = 1; i <= q.ell; ++i) {
      const double target = 2.0 * k * (q.ell - i + i * 2.2) / (q.ell + 1);
      const int bits = std::max(static_cast<int>(std::lround(target)), prev + 1);
      CHECK(q.tier_size(i) == c.pow2_frac(bits));
      prev = bits;
    }
  }
  CHECK(block_sizes(cfg, 0.1).ell == 22);
  CHECK_THROWS_AS(block_sizes(cfg, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(block_sizes(cfg, 0.25), std::invalid_argument);
}

TEST_CASE("regime and discretization") {
  auto cfg = TickConfig::power_of_four(2);
  auto p = block_sizes(cfg, 0.2);
  auto reg = BlockAllocator::default_regime(cfg, 0.2);
  CHECK(reg.lo == cfg.pow2_frac(20));
  CHECK(4 * reg.hi <= p.M.back());
  // ε^(2+γ) is above M_ℓ/4 here: an explicit regime at that bound is refused
  const Tick wide = static_cast<Tick>(std::ldexp(std::pow(1.0L / 16, 2.2L), cfg.resolution_log2));
  CHECK(wide > p.M.back() / 4);
  CHECK_THROWS_AS(BlockAllocator(cfg, 0.2, {reg.lo, wide}), std::invalid_argument);
  CHECK_THROWS_AS(BlockAllocator(cfg, 0.2, {reg.lo, p.M.back() / 4 + 1}), std::invalid_argument);
  CHECK_NOTHROW(BlockAllocator(cfg, 0.2, {reg.lo, p.M.back() / 4}));

  BlockAllocator a(cfg, 0.2);
  // grid by repeated multiplication
  std::vector<Tick> grid;
  long double g = static_cast<long double>(reg.lo);
  while (g <= reg.hi * 1.1L) {
    grid.push_back(static_cast<Tick>(std::ceil(g - 1e-9L)));
    g *= 1.0625L;
  }
  std::mt19937_64 rng(5);
  Tick prev_s = 0, prev_x = 0;
  std::vector<Tick> sizes;
  for (int q = 0; q < 2000; ++q) sizes.push_back(std::uniform_int_distribution<Tick>(reg.lo, reg.hi)(rng));
  std::sort(sizes.begin(), sizes.end());
  for (Tick s : sizes) {
    const Tick x = a.discretize(s);
    CHECK(x >= s);
    CHECK(*std::lower_bound(grid.begin(), grid.end(), s) == x);
    CHECK(a.discretize(x) == x);
    if (s >= prev_s) CHECK(x >= prev_x);
    prev_s = s;
    prev_x = x;
  }
  CHECK(a.discretize(reg.lo) == reg.lo);
  CHECK_THROWS_AS(a.insert(1, reg.lo - 1), RegimeError);
  CHECK_THROWS_AS(a.insert(1, reg.hi + 1), RegimeError);
}

TEST_CASE("first inserts and waste report") {
  Fixture f;
  CHECK(f.a.waste_report().total_block_mass == 0);
  CHECK(f.a.waste_report().total_present_mass == 0);
  const Tick s = f.reg.lo + 5;
  const Tick x = f.a.discretize(s);
  auto r = f.a.insert(0, s);
  f.w.apply(UpdateEvent::insert(0, s), r);
  CHECK(r.placed_at == 0);
  CHECK(f.a.active_start(x) == 0);
  CHECK(f.a.waste_report().total_block_mass - f.a.waste_report().total_present_mass == f.M - s);
  r = f.a.insert(1, s);
  CHECK(r.placed_at == x);
  // a second size opens the next empty aligned region
  r = f.a.insert(2, f.reg.lo);
  CHECK(r.placed_at == f.M);
  CHECK(f.a.block_total() == 2);
  CHECK(!f.a.self_check());
}

TEST_CASE("deleting the only item frees its block") {
  Fixture f;
  f.insert(f.reg.lo);
  f.erase(0);
  CHECK(f.a.block_total() == 0);
  CHECK(f.a.active_start(f.reg.lo) == -1);
  CHECK(f.a.waste_report().total_block_mass == 0);
  CHECK(!f.a.self_check());
}

TEST_CASE("deletes fill the hole from the active block") {
  Fixture f;
  const Tick x = f.reg.lo;
  for (int q = 0; q < 10; ++q) f.insert(x);  // 8 in the first block, 2 in the active one
  CHECK(f.a.active_start(x) == f.M);
  CHECK(f.a.active_items(x) == 2);
  const Tick moved = f.erase(3);
  CHECK(moved == x);
  CHECK(f.a.offset_of(9) == 3 * x);
  CHECK(f.a.active_items(x) == 1);
  CHECK(!f.a.self_check());
}

TEST_CASE("merge and fracture replay") {
  Fixture f;
  const Tick x = f.reg.lo;
  const int ell = f.p.ell;
  for (int q = 0; q < 24; ++q) REQUIRE(f.insert(x) == 0);
  CHECK(f.a.count(x, ell) == 3);
  CHECK(f.a.merge_passes() == 0);
  // a fourth tier-ℓ block breaks the bound of 3 and merges two full blocks in place
  CHECK(f.insert(x) == 0);
  CHECK(f.a.merge_passes() == 1);
  CHECK(f.a.count(x, ell - 1) == 1);
  CHECK(f.a.count(x, ell) == 2);
  CHECK(f.a.block_of(0) == std::pair<Tick, int>{0, ell - 1});
  CHECK(f.a.active_start(x) == 3 * f.M);
  CHECK(!f.a.self_check());

  // emptying the active block hands over to the other tier-ℓ block
  f.erase(24);
  CHECK(f.a.active_start(x) == 2 * f.M);
  CHECK(f.a.fractures() == 0);
  for (ItemId id = 16; id < 24; ++id) f.erase(id);
  // no tier-ℓ block left: the 16-item block splits into two full tier-ℓ blocks
  CHECK(f.a.fractures() == 1);
  CHECK(f.a.count(x, ell - 1) == 0);
  CHECK(f.a.count(x, ell) == 2);
  CHECK(f.a.active_start(x) == 0);
  CHECK(f.a.active_items(x) == 8);
  CHECK(f.a.waste_report().total_block_mass == 2 * f.M);
  CHECK(f.a.waste_report().total_present_mass == 16 * x);
  CHECK(!f.a.self_check());
}

TEST_CASE("place displaces smaller blocks") {
  Fixture f;
  const Tick x = f.reg.lo;
  const Tick s2 = x + 1;
  const Tick s3 = f.a.discretize(s2) + 1;
  const Tick x2 = f.a.discretize(s2);
  const Tick x3 = f.a.discretize(s3);
  REQUIRE(x3 > x2);
  REQUIRE(f.insert(s2) == 0);
  REQUIRE(f.insert(s3) == 0);
  CHECK(f.a.active_start(x2) == 0);
  CHECK(f.a.active_start(x3) == f.M);
  for (int q = 0; q < 24; ++q) f.insert(x);  // blocks at 2M, 3M, 4M
  const std::size_t depth_before = f.a.max_place_depth();
  const Tick moved = f.insert(x);  // merge: the tier ℓ-1 block lands on [0, 2M)
  CHECK(f.a.count(x, f.p.ell - 1) == 1);
  CHECK(f.a.block_of(2) == std::pair<Tick, int>{0, f.p.ell - 1});
  CHECK(f.a.active_start(x2) == 2 * f.M);
  CHECK(f.a.active_start(x3) == 3 * f.M);
  CHECK(moved == 16 * x + s2 + s3);
  CHECK(f.a.max_place_depth() >= 2);
  CHECK(depth_before == 0);
  CHECK(!f.a.self_check());
}

TEST_CASE("fuzz keeps invariants and the waste bound") {
  for (int k : {2, 3}) {
    CAPTURE(k);
    auto cfg = TickConfig::power_of_four(k);
    auto reg = BlockAllocator::default_regime(cfg, 0.2);
    WorkloadSpec spec{FuzzWorkload{reg.lo, reg.hi, 0.9, SizeLaw::Uniform}, 10000, static_cast<std::uint64_t>(40 + k)};
    auto ev = generate(spec, cfg);
    BlockAllocator a(cfg, 0.2);
    Tick worst = 0;
    bool conserved = true;
    RunOptions opts;
    opts.on_step = [&](const StepView& v) {
      const auto rep = a.waste_report();
      worst = std::max(worst, rep.total_block_mass - rep.total_present_mass);
      conserved = conserved && rep.total_present_mass == v.world.present_mass();
    };
    auto out = run_events(a, ev, cfg, opts);
    CHECK_MESSAGE(out.valid, out.failure);
    CHECK(conserved);
    CHECK(worst <= cfg.epsilon_ticks);
    CHECK(a.merge_passes() > 0);
    MESSAGE("k=" << k << " upwards-stream triggers: " << a.upwards_stream_triggers()
                 << ", extra sweeps: " << a.extra_sweeps());
  }
}
