#include <set>

#include "doctest.h"
#include "mrlab/workload.hpp"

using namespace mrlab;

namespace {

// Independent replay: returns the max running load, or -1 if the stream is malformed.
Tick replay_max_load(const std::vector<UpdateEvent>& ev) {
  std::unordered_map<ItemId, Tick> present;
  Tick load = 0, peak = 0;
  for (const auto& e : ev) {
    if (e.kind == EventKind::Insert) {
      if (present.count(e.id)) return -1;
      present[e.id] = e.size;
      load += e.size;
    } else {
      auto it = present.find(e.id);
      if (it == present.end()) return -1;
      load -= it->second;
      present.erase(it);
    }
    peak = std::max(peak, load);
  }
  return peak;
}

}  // namespace

TEST_CASE("lower bound sequence shape") {
  auto cfg = TickConfig::power_of_four(4);  // ε = 2^-8
  auto ev = gen_lower_bound(cfg);
  REQUIRE(ev.size() == 12);
  const Tick root = cfg.memory() >> 4;
  const Tick s1 = root + 2 * (cfg.memory() >> 8);
  std::set<Tick> sizes;
  for (int i = 0; i < 4; ++i) {
    CHECK(ev[i].kind == EventKind::Insert);
    CHECK(ev[i].size == s1);
  }
  for (int i = 0; i < 4; ++i) {
    CHECK(ev[4 + 2 * i].kind == EventKind::Delete);
    CHECK(ev[4 + 2 * i].id == static_cast<ItemId>(i));
    CHECK(ev[5 + 2 * i].kind == EventKind::Insert);
    CHECK(ev[5 + 2 * i].size == root);
  }
  for (const auto& e : ev)
    if (e.kind == EventKind::Insert) sizes.insert(e.size);
  CHECK(sizes.size() == 2);

  CHECK(gen_lower_bound(TickConfig::power_of_four(6)).size() == 48);
  CHECK(gen_lower_bound(TickConfig::power_of_four(3)).size() == 6);
  CHECK_THROWS(gen_lower_bound(TickConfig::power_of_four(1)));
  CHECK_THROWS(gen_lower_bound(TickConfig{40, Tick{1} << 33}));
}

TEST_CASE("random item sequence") {
  auto cfg = TickConfig::power_of_four(3);
  const Tick delta = cfg.memory() / 64;
  WorkloadSpec spec{RandomItemWorkload{delta}, 1000, 5};
  auto ev = gen_random_item(spec, cfg);
  REQUIRE(ev.size() == 1000);
  for (int i = 0; i < 16; ++i) CHECK(ev[i].kind == EventKind::Insert);
  std::unordered_map<ItemId, Tick> present;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& e = ev[i];
    if (e.kind == EventKind::Insert) {
      CHECK(e.size >= delta);
      CHECK(e.size <= 2 * delta);
      present[e.id] = e.size;
    } else {
      present.erase(e.id);
    }
    if (i >= 15) {
      CHECK(present.size() >= 16);
      CHECK(present.size() <= 17);
    }
  }
  CHECK(replay_max_load(ev) > 0);
  CHECK(gen_random_item(spec, cfg) == ev);
  WorkloadSpec other = spec;
  other.seed = 6;
  CHECK_FALSE(gen_random_item(other, cfg) == ev);
  CHECK_THROWS(gen_random_item(WorkloadSpec{RandomItemWorkload{cfg.memory() / 4}, 10, 1}, cfg));
}

TEST_CASE("fuzz respects the load factor") {
  auto cfg = TickConfig::power_of_four(3);
  const Tick eps = cfg.epsilon_ticks;
  WorkloadSpec spec{FuzzWorkload{eps, 2 * eps - 1, 0.9, SizeLaw::Uniform}, 100000, 3};
  auto ev = gen_fuzz(spec, cfg);
  REQUIRE(ev.size() == 100000);
  Tick peak = replay_max_load(ev);
  REQUIRE(peak >= 0);
  CHECK(peak <= cfg.memory() - eps);
  CHECK(peak >= cfg.from_fraction(0.8));
  CHECK(gen_fuzz(spec, cfg) == ev);
}

TEST_CASE("fuzz edge cases") {
  auto cfg = TickConfig::power_of_four(2);
  WorkloadSpec zero{FuzzWorkload{100, 200, 0.0}, 50, 1};
  auto ev = gen_fuzz(zero, cfg);
  for (std::size_t i = 0; i < ev.size(); ++i)
    CHECK(ev[i].kind == (i % 2 == 0 ? EventKind::Insert : EventKind::Delete));

  WorkloadSpec fixed{FuzzWorkload{777, 777, 0.5}, 500, 2};
  for (const auto& e : gen_fuzz(fixed, cfg))
    if (e.kind == EventKind::Insert) CHECK(e.size == 777);

  WorkloadSpec logu{FuzzWorkload{1, cfg.memory() / 2, 0.9, SizeLaw::LogUniform}, 20000, 9};
  auto lv = gen_fuzz(logu, cfg);
  CHECK(replay_max_load(lv) <= cfg.memory() - cfg.epsilon_ticks);

  CHECK_THROWS(gen_fuzz(WorkloadSpec{FuzzWorkload{cfg.memory(), cfg.memory(), 0.5}, 5, 1}, cfg));
  CHECK_THROWS(gen_fuzz(WorkloadSpec{FuzzWorkload{10, 5, 0.5}, 5, 1}, cfg));
}
