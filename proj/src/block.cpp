#include "mrlab/block.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mrlab {

BlockParams block_sizes(const TickConfig& cfg, double gamma) {
  if (!(gamma > 0 && gamma < 0.25)) throw std::invalid_argument("block: gamma must lie in (0, 1/4)");
  BlockParams p;
  p.gamma = gamma;
  p.a = 2 + gamma;
  for (int ell = 2;; ++ell) {
    const double inv = 1.0 / (ell - 1);
    if (gamma / 4 < inv && inv < gamma / 2) {
      p.ell = ell;
      break;
    }
    if (inv <= gamma / 4) throw std::invalid_argument("block: no valid ell");
  }
  const long double lg = -std::log2(static_cast<long double>(cfg.to_fraction(cfg.epsilon_ticks)));
  int prev = -1;
  for (int i = 1; i <= p.ell; ++i) {
    const long double e = (p.ell - i + i * static_cast<long double>(p.a)) / (p.ell + 1);
    int bits = static_cast<int>(std::lround(lg * e));
    bits = std::max({bits, prev + 1, 0});
    if (bits > cfg.resolution_log2) throw std::invalid_argument("block: M_ell below one tick");
    p.M.push_back(cfg.pow2_frac(bits));
    prev = bits;
  }
  return p;
}

BlockAllocator::Regime BlockAllocator::default_regime(const TickConfig& cfg, double gamma) {
  const BlockParams p = block_sizes(cfg, gamma);
  const long double eps = cfg.to_fraction(cfg.epsilon_ticks);
  Regime r;
  r.lo = std::max<Tick>(1, cfg.from_fraction(std::pow(eps, 5.0L)));
  const Tick hi = std::max<Tick>(1, static_cast<Tick>(std::floor(std::ldexp(std::pow(eps, static_cast<long double>(p.a)),
                                                                            cfg.resolution_log2))));
  r.hi = std::min(hi, p.M.back() / 4);
  if (r.hi < r.lo) throw std::invalid_argument("block: empty default regime");
  return r;
}

BlockAllocator::BlockAllocator(TickConfig cfg, double gamma, Regime regime)
    : cfg_(cfg), p_(block_sizes(cfg, gamma)), regime_(regime) {
  cfg_.check();
  if (regime_.lo <= 0 || regime_.lo > regime_.hi) throw std::invalid_argument("block: bad regime");
  if (p_.M.back() < 4 * regime_.hi) throw std::invalid_argument("block: M_ell < 4 * max item size");
  log_step_ = std::log1p(static_cast<long double>(cfg_.to_fraction(cfg_.epsilon_ticks)));
}

Tick BlockAllocator::discretize(Tick size) const {
  if (size <= regime_.lo) return regime_.lo;
  const long double lo = static_cast<long double>(regime_.lo);
  auto grid = [&](long long j) { return static_cast<Tick>(std::ceil(lo * std::exp(log_step_ * j))); };
  long long j = static_cast<long long>(std::ceil(std::log(size / lo) / log_step_));
  while (grid(j) < size) ++j;
  while (j > 0 && grid(j - 1) >= size) --j;
  return grid(j);
}

bool BlockAllocator::over_hou(std::size_t n, int tier) const {
  return 2 * static_cast<Tick>(n) > 3 * p_.ratio(tier);
}
bool BlockAllocator::over_merge(std::size_t n, int tier) const {
  return 4 * static_cast<Tick>(n) > 5 * p_.ratio(tier);
}
bool BlockAllocator::at_least_merge(std::size_t n, int tier) const {
  return 4 * static_cast<Tick>(n) >= 5 * p_.ratio(tier);
}

void BlockAllocator::fail(const std::string& tag) const {
  throw AssertionFailure("block assert " + tag + "\n" + dump());
}

BlockAllocator::SizeState& BlockAllocator::state(Tick x) {
  auto& st = sizes_[x];
  if (st.tiers.empty()) st.tiers.resize(static_cast<std::size_t>(p_.ell));
  return st;
}

std::size_t BlockAllocator::count(Tick x, int tier) const {
  auto it = sizes_.find(x);
  if (it == sizes_.end()) return 0;
  return it->second.tiers[static_cast<std::size_t>(tier - 1)].size();
}

Tick BlockAllocator::active_start(Tick x) const {
  auto it = sizes_.find(x);
  if (it == sizes_.end() || !it->second.has_active) return -1;
  return blocks_.at(it->second.active).start;
}

std::size_t BlockAllocator::active_items(Tick x) const {
  auto it = sizes_.find(x);
  if (it == sizes_.end() || !it->second.has_active) return 0;
  return blocks_.at(it->second.active).items.size();
}

std::vector<std::size_t> BlockAllocator::tier_occupancy() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(p_.ell), 0);
  for (const auto& [id, b] : blocks_) ++out[static_cast<std::size_t>(b.tier - 1)];
  return out;
}

std::pair<Tick, int> BlockAllocator::block_of(ItemId id) const {
  const Block& b = blocks_.at(where_.at(id).first);
  return {b.start, b.tier};
}

BlockAllocator::BlockId BlockAllocator::create(int tier, Tick x, std::vector<ItemId> items) {
  const BlockId id = next_block_++;
  for (std::size_t s = 0; s < items.size(); ++s) where_[items[s]] = {id, s};
  blocks_.emplace(id, Block{tier, x, -1, std::move(items)});
  state(x).tiers[static_cast<std::size_t>(tier - 1)].insert(id);
  block_mass_ += p_.tier_size(tier);
  return id;
}

void BlockAllocator::destroy(BlockId b) {
  Block& bl = blocks_.at(b);
  unindex(b);
  auto& st = sizes_.at(bl.x);
  st.tiers[static_cast<std::size_t>(bl.tier - 1)].erase(b);
  if (st.has_active && st.active == b) st.has_active = false;
  block_mass_ -= p_.tier_size(bl.tier);
  blocks_.erase(b);
}

void BlockAllocator::index(BlockId b) { by_start_.emplace(blocks_.at(b).start, b); }

void BlockAllocator::unindex(BlockId b) {
  Block& bl = blocks_.at(b);
  if (bl.start >= 0) by_start_.erase(bl.start);
  bl.start = -1;
}

void BlockAllocator::put_item(ItemId id, BlockId b, std::size_t slot, UpdateResult& res) {
  const Block& bl = blocks_.at(b);
  const Tick to = bl.start + static_cast<Tick>(slot) * bl.x;
  Tick& at = pos_.at(id);
  if (at != to) res.moves.push_back({id, at, to});
  at = to;
}

std::optional<Tick> BlockAllocator::find_region(int tier, bool empty_only) const {
  const Tick M = p_.tier_size(tier);
  Tick cursor = 0;
  for (const auto& [s, id] : by_start_) {
    const Block& bl = blocks_.at(id);
    const Tick e = s + p_.tier_size(bl.tier);
    if (e <= cursor) continue;
    if (s >= cursor + M) break;
    if (empty_only || bl.tier <= tier) cursor = (e + M - 1) / M * M;
  }
  if (cursor + M > cfg_.memory()) return std::nullopt;
  return cursor;
}

void BlockAllocator::move_block(BlockId b, Tick to, UpdateResult& res) {
  Block& bl = blocks_.at(b);
  bl.start = to;
  for (std::size_t s = 0; s < bl.items.size(); ++s) put_item(bl.items[s], b, s, res);
  index(b);
}

void BlockAllocator::place(BlockId b, UpdateResult& res, std::size_t depth) {
  ++places_;
  max_depth_ = std::max(max_depth_, depth + 1);
  const int tier = blocks_.at(b).tier;
  const auto region = find_region(tier, false);
  if (!region) fail("can-find-place");
  const Tick M = p_.tier_size(tier);
  std::vector<BlockId> displaced;
  for (auto it = by_start_.lower_bound(*region); it != by_start_.end() && it->first < *region + M; ++it)
    displaced.push_back(it->second);
  for (BlockId d : displaced) unindex(d);
  move_block(b, *region, res);
  for (BlockId d : displaced) place(d, res, depth + 1);
}

std::vector<BlockAllocator::BlockId> BlockAllocator::repack(Tick x, std::vector<ItemId> items, int first_tier,
                                                            int from_tier) {
  std::vector<BlockId> out;
  std::size_t at = 0;
  auto take = [&](std::size_t n) {
    std::vector<ItemId> part(items.begin() + static_cast<std::ptrdiff_t>(at),
                             items.begin() + static_cast<std::ptrdiff_t>(at + n));
    at += n;
    return part;
  };
  const std::size_t n = items.size();
  out.push_back(create(first_tier, x, take(std::min<std::size_t>(n, capacity(x, first_tier)))));
  for (int t = from_tier; t <= p_.ell; ++t) {
    const auto c = static_cast<std::size_t>(capacity(x, t));
    while (n - at >= c) out.push_back(create(t, x, take(c)));
  }
  if (at < n) out.push_back(create(p_.ell, x, take(n - at)));
  return out;
}

void BlockAllocator::fracture(Tick x, UpdateResult& res) {
  ++fractures_;
  auto& st = state(x);
  int tier = 0;
  for (int i = p_.ell; i >= 1; --i) {
    if (!st.tiers[static_cast<std::size_t>(i - 1)].empty()) {
      tier = i;
      break;
    }
  }
  if (tier == 0 || tier == p_.ell) fail("not_fracture_l");
  BlockId victim = 0;
  Tick best = -1;
  for (BlockId b : st.tiers[static_cast<std::size_t>(tier - 1)]) {
    const Tick s = blocks_.at(b).start;
    if (best < 0 || s < best) {
      best = s;
      victim = b;
    }
  }
  std::vector<ItemId> items = blocks_.at(victim).items;
  destroy(victim);
  const auto fresh = repack(x, std::move(items), p_.ell, tier + 1);
  for (int i = 2; i <= p_.ell; ++i)
    if (over_hou(count(x, i), i)) fail("fracture-not-violate-invar");
  for (BlockId b : fresh) place(b, res, 0);
}

void BlockAllocator::merge(Tick x, int tier, UpdateResult& res) {
  if (tier <= 1) fail("dont-merge-1");
  if (tier != 2 && over_merge(count(x, tier - 1), tier - 1)) fail("merge-next-small");
  while (over_merge(count(x, tier), tier)) {
    ++merge_passes_;
    auto& st = state(x);
    const auto m = static_cast<std::size_t>(capacity(x, tier - 1));
    std::vector<BlockId> cand;
    for (BlockId b : st.tiers[static_cast<std::size_t>(tier - 1)])
      if (!(st.has_active && st.active == b)) cand.push_back(b);
    std::sort(cand.begin(), cand.end(), [&](BlockId a, BlockId b) {
      const Block& A = blocks_.at(a);
      const Block& B = blocks_.at(b);
      if (A.items.size() != B.items.size()) return A.items.size() > B.items.size();
      return A.start < B.start;
    });
    std::size_t k = 0, have = 0;
    while (k < cand.size() && have < m) have += blocks_.at(cand[k++]).items.size();
    // short of m only when x does not divide the tier size; the merged block is then underfull
    if (have < m) ++short_merges_;
    if (k < 2) fail("merge-has-items");
    std::vector<ItemId> items;
    for (std::size_t q = 0; q < k; ++q) {
      const auto& v = blocks_.at(cand[q]).items;
      items.insert(items.end(), v.begin(), v.end());
      destroy(cand[q]);
    }
    const auto fresh = repack(x, std::move(items), tier - 1, tier + 1);
    for (BlockId b : fresh) place(b, res, 0);
  }
  if (tier != 2 && over_hou(count(x, tier - 1), tier - 1)) ++upward_;
  if (over_merge(count(x, tier), tier)) fail("merge-lol-we-merged");
}

void BlockAllocator::designate(Tick x) {
  auto& st = state(x);
  Tick best = -1;
  for (BlockId b : st.tiers[static_cast<std::size_t>(p_.ell - 1)]) {
    const Tick s = blocks_.at(b).start;
    if (best < 0 || s < best) {
      best = s;
      st.active = b;
    }
  }
  st.has_active = best >= 0;
}

UpdateResult BlockAllocator::insert(ItemId id, Tick size) {
  if (size < regime_.lo || size > regime_.hi) throw RegimeError("block: size outside the regime");
  if (where_.count(id)) throw StructuralError("block: duplicate id");
  const Tick x = discretize(size);
  const auto cap = static_cast<std::size_t>(capacity(x, p_.ell));
  UpdateResult res;
  auto& st = state(x);
  if (!st.has_active || blocks_.at(st.active).items.size() + 1 > cap) {
    const auto region = find_region(p_.ell, true);
    if (!region) fail("empty-region-exists");
    const BlockId b = create(p_.ell, x, {});
    blocks_.at(b).start = *region;
    index(b);
    st.active = b;
    st.has_active = true;
    auto violated = [&] {
      for (int i = 2; i <= p_.ell; ++i)
        if (over_hou(count(x, i), i)) return true;
      return false;
    };
    // leftovers can stream blocks back up into tiers an earlier pass already fixed
    for (int sweep = 0; sweep < p_.ell && violated(); ++sweep) {
      if (sweep > 0) ++extra_sweeps_;
      int i0 = 2;
      while (i0 < p_.ell && !at_least_merge(count(x, i0), i0)) ++i0;
      for (int i = i0; i <= p_.ell; ++i) merge(x, i, res);
    }
    if (violated()) fail("merge-hou-invar-holds");
  }
  Block& a = blocks_.at(st.active);
  if (a.items.size() + 1 > cap) fail("can-fit");
  const std::size_t slot = a.items.size();
  a.items.push_back(id);
  where_[id] = {st.active, slot};
  res.placed_at = a.start + static_cast<Tick>(slot) * x;
  pos_[id] = res.placed_at;
  true_[id] = size;
  present_ += size;
  peak_waste_ = std::max(peak_waste_, block_mass_ - present_);
  coalesce(res);
  return res;
}

UpdateResult BlockAllocator::erase(ItemId id) {
  auto w = where_.find(id);
  if (w == where_.end()) throw StructuralError("block: delete of absent id");
  const auto [b, slot] = w->second;
  const Tick x = blocks_.at(b).x;
  auto& st = state(x);
  if (!st.has_active) fail("active-exists");
  UpdateResult res;
  Block& a = blocks_.at(st.active);
  const ItemId last = a.items.back();
  if (last != id) {
    blocks_.at(b).items[slot] = last;
    where_[last] = {b, slot};
    put_item(last, b, slot, res);
  }
  a.items.pop_back();
  where_.erase(id);
  pos_.erase(id);
  present_ -= true_.at(id);
  true_.erase(id);
  if (a.items.empty()) {
    destroy(st.active);
    std::size_t others = 0;
    for (const auto& t : st.tiers) others += t.size();
    if (others > 0) {
      if (count(x, p_.ell) == 0) fracture(x, res);
      if (count(x, p_.ell) == 0) fail("block-fracture-succeeds");
      designate(x);
    } else {
      sizes_.erase(x);
    }
  }
  peak_waste_ = std::max(peak_waste_, block_mass_ - present_);
  coalesce(res);
  return res;
}

std::optional<std::string> BlockAllocator::self_check() const {
  Tick reach = 0;
  for (const auto& [s, id] : by_start_) {
    const Block& bl = blocks_.at(id);
    const Tick M = p_.tier_size(bl.tier);
    if (bl.start != s) return "block index out of date";
    if (s % M != 0) return "block at " + std::to_string(s) + " misaligned";
    if (s < reach) return "blocks overlap at " + std::to_string(s);
    reach = s + M;
  }
  if (reach > cfg_.memory()) return "block beyond memory";
  if (by_start_.size() != blocks_.size()) return "unplaced block";
  Tick mass = 0;
  std::size_t items = 0;
  for (const auto& [id, bl] : blocks_) {
    mass += p_.tier_size(bl.tier);
    if (bl.items.empty()) return "empty block";
    if (static_cast<std::int64_t>(bl.items.size()) > capacity(bl.x, bl.tier)) return "overfull block";
    for (std::size_t s = 0; s < bl.items.size(); ++s) {
      const ItemId it = bl.items[s];
      ++items;
      if (discretize(true_.at(it)) != bl.x) return "mixed sizes in a block";
      if (where_.at(it) != std::pair{id, s}) return "item index out of date";
      if (pos_.at(it) != bl.start + static_cast<Tick>(s) * bl.x) return "item off its slot";
    }
  }
  if (items != where_.size()) return "item count mismatch";
  if (mass != block_mass_) return "block mass mismatch";
  for (const auto& [x, st] : sizes_) {
    std::size_t total = 0;
    for (int i = 1; i <= p_.ell; ++i) {
      const std::size_t n = st.tiers[static_cast<std::size_t>(i - 1)].size();
      total += n;
      if (i >= 2 && over_hou(n, i)) return "too many blocks of tier " + std::to_string(i);
    }
    if (total == 0) return "size without blocks";
    if (!st.has_active) return "size without an active block";
    if (blocks_.at(st.active).tier != p_.ell) return "active block not of tier ell";
  }
  return std::nullopt;
}

AllocStats BlockAllocator::stats() const {
  AllocStats s;
  s.rebuilds = fractures_ + merge_passes_;
  s.max_waste = peak_waste_;
  s.extra["fractures"] = static_cast<double>(fractures_);
  s.extra["merge_passes"] = static_cast<double>(merge_passes_);
  s.extra["places"] = static_cast<double>(places_);
  s.extra["upwards_stream"] = static_cast<double>(upward_);
  s.extra["short_merges"] = static_cast<double>(short_merges_);
  s.extra["extra_sweeps"] = static_cast<double>(extra_sweeps_);
  s.extra["blocks"] = static_cast<double>(blocks_.size());
  s.extra["max_place_depth"] = static_cast<double>(max_depth_);
  const auto occ = tier_occupancy();
  for (std::size_t i = 0; i < occ.size(); ++i) s.extra["tier" + std::to_string(i + 1)] = static_cast<double>(occ[i]);
  return s;
}

std::string BlockAllocator::dump() const {
  std::ostringstream os;
  os << "ell=" << p_.ell << " M_ell=" << p_.M.back() << " blocks=" << blocks_.size() << " present=" << present_
     << " block_mass=" << block_mass_ << "\n";
  for (const auto& [x, st] : sizes_) {
    os << "x=" << x << " active=" << (st.has_active ? std::to_string(blocks_.at(st.active).start) : "-") << " tiers:";
    for (const auto& t : st.tiers) os << ' ' << t.size();
    os << "\n";
  }
  for (const auto& [id, bl] : blocks_)
    os << "  block " << id << " tier " << bl.tier << " x " << bl.x << " start " << bl.start << " items "
       << bl.items.size() << "\n";
  return os.str();
}

}  // namespace mrlab
