#include "mrlab/workload.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mrlab {

namespace {

// Present set with O(1) uniform sampling and removal.
class PresentSet {
 public:
  void add(ItemId id, Tick size) {
    index_[id] = ids_.size();
    ids_.push_back(id);
    sizes_.push_back(size);
  }
  std::pair<ItemId, Tick> remove_at(std::size_t i) {
    auto out = std::make_pair(ids_[i], sizes_[i]);
    index_.erase(ids_[i]);
    if (i + 1 != ids_.size()) {
      ids_[i] = ids_.back();
      sizes_[i] = sizes_.back();
      index_[ids_[i]] = i;
    }
    ids_.pop_back();
    sizes_.pop_back();
    return out;
  }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

 private:
  std::vector<ItemId> ids_;
  std::vector<Tick> sizes_;
  std::unordered_map<ItemId, std::size_t> index_;
};

Tick draw_size(std::mt19937_64& rng, Tick lo, Tick hi, SizeLaw law) {
  if (law == SizeLaw::Uniform || lo == hi) return std::uniform_int_distribution<Tick>(lo, hi)(rng);
  std::uniform_real_distribution<long double> u(std::log(static_cast<long double>(lo)),
                                                std::log(static_cast<long double>(hi)));
  auto s = static_cast<Tick>(std::llround(std::exp(u(rng))));
  return std::clamp(s, lo, hi);
}

}  // namespace

std::vector<UpdateEvent> gen_lower_bound(const TickConfig& cfg) {
  auto k = cfg.eps_log4();
  if (!k || *k < 2) throw std::invalid_argument("lower bound needs eps = 4^-k with k >= 2");
  const Tick root = cfg.pow2_frac(*k);  // ε^(1/2)
  const Tick s1 = root + 2 * cfg.epsilon_ticks;
  const Tick s2 = root;
  const std::size_t n = (std::size_t{1} << *k) / 4;
  std::vector<UpdateEvent> out;
  out.reserve(3 * n);
  ItemId next = 0;
  for (std::size_t i = 0; i < n; ++i) out.push_back(UpdateEvent::insert(next++, s1));
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(UpdateEvent::erase(static_cast<ItemId>(i), s1));
    out.push_back(UpdateEvent::insert(next++, s2));
  }
  return out;
}

std::vector<UpdateEvent> gen_random_item(const WorkloadSpec& spec, const TickConfig& cfg) {
  const auto& w = std::get<RandomItemWorkload>(spec.kind);
  if (w.delta <= 0 || w.delta > cfg.memory() / 8) throw std::invalid_argument("delta must lie in (0, memory/8]");
  std::mt19937_64 rng(spec.seed);
  const auto initial = static_cast<std::size_t>(cfg.memory() / (4 * w.delta));
  PresentSet present;
  std::vector<UpdateEvent> out;
  out.reserve(spec.num_updates);
  ItemId next = 0;
  bool insert_turn = true;
  while (out.size() < spec.num_updates) {
    if (out.size() < initial || insert_turn || present.empty()) {
      Tick s = std::uniform_int_distribution<Tick>(w.delta, 2 * w.delta)(rng);
      present.add(next, s);
      out.push_back(UpdateEvent::insert(next++, s));
      if (out.size() > initial) insert_turn = false;
    } else {
      auto i = std::uniform_int_distribution<std::size_t>(0, present.size() - 1)(rng);
      auto [id, s] = present.remove_at(i);
      out.push_back(UpdateEvent::erase(id, s));
      insert_turn = true;
    }
  }
  return out;
}

std::vector<UpdateEvent> gen_fuzz(const WorkloadSpec& spec, const TickConfig& cfg) {
  const auto& w = std::get<FuzzWorkload>(spec.kind);
  const Tick cap = cfg.memory() - cfg.epsilon_ticks;
  if (w.size_lo <= 0 || w.size_lo > w.size_hi) throw std::invalid_argument("fuzz: bad size range");
  if (w.size_lo > cap) throw std::invalid_argument("fuzz: size_lo exceeds (1-eps) of memory");
  if (w.target_load < 0 || w.target_load > 1.0 - cfg.epsilon())
    throw std::invalid_argument("fuzz: target_load must lie in [0, 1-eps]");
  const Tick target = std::min(cap, cfg.from_fraction(w.target_load));
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  PresentSet present;
  std::vector<UpdateEvent> out;
  out.reserve(spec.num_updates);
  ItemId next = 0;
  Tick load = 0;
  while (out.size() < spec.num_updates) {
    Tick s = draw_size(rng, w.size_lo, std::min(w.size_hi, cap), w.law);
    bool fits = load + s <= cap;
    bool do_insert;
    if (present.empty()) {
      do_insert = fits;
    } else if (!fits || load + s > target) {
      do_insert = false;
    } else {
      double p = 0.5 + 0.5 * (1.0 - static_cast<double>(load) / static_cast<double>(target));
      do_insert = coin(rng) < p;
    }
    if (do_insert) {
      present.add(next, s);
      load += s;
      out.push_back(UpdateEvent::insert(next++, s));
    } else if (!present.empty()) {
      auto i = std::uniform_int_distribution<std::size_t>(0, present.size() - 1)(rng);
      auto [id, sz] = present.remove_at(i);
      load -= sz;
      out.push_back(UpdateEvent::erase(id, sz));
    }
  }
  return out;
}

std::vector<UpdateEvent> generate(const WorkloadSpec& spec, const TickConfig& cfg) {
  return std::visit(
      [&](const auto& kind) -> std::vector<UpdateEvent> {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, LowerBoundWorkload>) {
          auto ev = gen_lower_bound(cfg);
          if (spec.num_updates != 0 && spec.num_updates < ev.size()) ev.resize(spec.num_updates);
          return ev;
        } else if constexpr (std::is_same_v<K, RandomItemWorkload>) {
          return gen_random_item(spec, cfg);
        } else {
          return gen_fuzz(spec, cfg);
        }
      },
      spec.kind);
}

}  // namespace mrlab
