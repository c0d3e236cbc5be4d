#include "mrlab/flex.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace mrlab {

// ---------------------------------------------------------------- TinyRef

TinyRef::TinyRef(Tick unit_size) : M_(unit_size) {
  if (M_ <= 0 || !std::has_single_bit(static_cast<std::uint64_t>(M_)))
    throw std::invalid_argument("tiny: unit size must be a power of two");
}

Tick TinyRef::slab_for(Tick size) {
  return static_cast<Tick>(std::bit_ceil(static_cast<std::uint64_t>(size)));
}

std::optional<Tick> TinyRef::fit(int unit, Tick slab) const {
  Tick cand = 0;
  for (const auto& [off, id] : units_[unit]) {
    if (cand + slab <= off) return cand;
    Tick end = std::max(cand, off + slab_.at(id));
    cand = (end + slab - 1) / slab * slab;
  }
  if (cand + slab <= M_) return cand;
  return std::nullopt;
}

std::optional<TinyRef::Slot> TinyRef::first_fit(Tick slab, int unit_limit) const {
  for (int u = 0; u < unit_limit; ++u)
    if (auto o = fit(u, slab)) return Slot{u, *o};
  return std::nullopt;
}

void TinyRef::put(ItemId id, Slot s) {
  units_[s.unit].emplace(s.offset, id);
  where_[id] = s;
}

TinyRef::Delta TinyRef::insert(ItemId id, Tick size) {
  if (size <= 0) throw RegimeError("tiny: non-positive size");
  if (where_.count(id)) throw StructuralError("tiny: duplicate id");
  const Tick slab = slab_for(size);
  if (slab > M_) throw RegimeError("tiny: item larger than a unit");
  Delta d;
  auto s = first_fit(slab, units());
  if (!s) {
    units_.emplace_back();
    ++d.created;
    s = Slot{units() - 1, 0};
  }
  slab_[id] = slab;
  slab_mass_ += slab;
  put(id, *s);
  d.placed = s;
  if (4 * static_cast<Wide>(slab_mass_) > 3 * static_cast<Wide>(units()) * M_) {
    units_.emplace_back();
    ++d.created;
  }
  return d;
}

TinyRef::Delta TinyRef::erase(ItemId id) {
  auto it = where_.find(id);
  if (it == where_.end()) throw StructuralError("tiny: unknown id");
  units_[it->second.unit].erase(it->second.offset);
  slab_mass_ -= slab_.at(id);
  slab_.erase(id);
  where_.erase(it);

  Delta d;
  const int s = units();
  if (s == 0 || 4 * static_cast<Wide>(slab_mass_) >= static_cast<Wide>(s) * M_) return d;
  const int last = s - 1;
  if (last == 0 && !units_[0].empty()) return d;

  // evacuate the last unit first-fit; undo everything if any item misses
  const std::vector<std::pair<Tick, ItemId>> victims(units_[last].begin(), units_[last].end());
  std::vector<Relocation> done;
  bool ok = true;
  for (auto [off, vid] : victims) {
    auto to = first_fit(slab_.at(vid), last);
    if (!to) {
      ok = false;
      break;
    }
    units_[last].erase(off);
    put(vid, *to);
    done.push_back({vid, Slot{last, off}, *to});
  }
  if (!ok) {
    for (auto rit = done.rbegin(); rit != done.rend(); ++rit) {
      units_[rit->to.unit].erase(rit->to.offset);
      put(rit->id, rit->from);
    }
    return d;
  }
  d.relocations = std::move(done);
  units_.pop_back();
  d.destroyed = true;
  d.destroyed_unit = last;
  return d;
}

// ---------------------------------------------------------------- Flex

namespace {

Tick floor_pow2(Tick x) { return x <= 0 ? 0 : static_cast<Tick>(std::bit_floor(static_cast<std::uint64_t>(x))); }

Tick unit_size_for(const TickConfig& cfg, int k) {
  const Tick e3 = Tick{1} << (cfg.resolution_log2 - 6 * k);
  // keep 16·C·M within ε/2 so the buffer total fits its share
  const Tick cap = floor_pow2(cfg.epsilon_ticks / (32 * 8 * k));
  return std::min(e3, cap);
}

}  // namespace

FlexAllocator::FlexAllocator(TickConfig cfg, std::uint64_t seed, Tick base)
    : cfg_(cfg), tiny_(1), rng_(seed) {
  cfg_.check();
  auto k = cfg_.eps_log4();
  if (!k || *k < 1) throw std::invalid_argument("flex: epsilon must be 4^-k with k >= 1");
  if (cfg_.resolution_log2 < 8 * *k) throw std::invalid_argument("flex: resolution too coarse for eps^4");
  e4_ = Tick{1} << (cfg_.resolution_log2 - 8 * *k);
  M_ = unit_size_for(cfg_, *k);
  if (M_ <= e4_) throw std::invalid_argument("flex: unit not larger than a tiny item");
  C_ = 8 * *k;
  for (int i = 1; i <= C_ && static_cast<Wide>(100) * (static_cast<Wide>(e4_) << i) <= M_; ++i) Csmall_ = i;
  tiny_ = TinyRef(M_);
  B_.assign(C_ + 1, 8 * M_);
  B_[0] = 0;
  P_.assign(C_ + 1, 0);
  Pl_.assign(C_ + 1, 0);
  R_.assign(C_ + 1, 0);
  Rl_.assign(C_ + 1, 0);
  for (int i = 1; i <= Csmall_; ++i) {
    R_[i] = sample_R();
    Rl_[i] = sample_R();
  }
  sumB_ = std::accumulate(B_.begin(), B_.end(), Tick{0});
  delta_ = base;
}

Tick FlexAllocator::sample_R() { return std::uniform_int_distribution<Tick>(2 * M_ + 1, 4 * M_ - 1)(rng_); }

int FlexAllocator::type_of(Tick x) const {
  if (x <= e4_) throw RegimeError("flex: external update not above eps^4");
  const Tick q = (x + e4_ - 1) / e4_;
  int i = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(q - 1)));
  if (i > C_) throw RegimeError("flex: external update larger than memory");
  return i;
}

Tick FlexAllocator::unit_address(int unit) const { return central_start() + static_cast<Tick>(pi_.at(unit)) * M_; }

Tick FlexAllocator::offset_of(ItemId id) const {
  auto s = tiny_.slot_of(id);
  return unit_address(s.unit) + s.offset;
}

std::vector<Tick> FlexAllocator::unit_addresses() const {
  std::vector<Tick> a(pi_.size());
  for (std::size_t u = 0; u < pi_.size(); ++u) a[u] = unit_address(static_cast<int>(u));
  return a;
}

void FlexAllocator::emit_unit_moves(const std::vector<Tick>& before, UpdateResult& res) {
  for (std::size_t u = 0; u < before.size() && u < pi_.size(); ++u) {
    const Tick now = unit_address(static_cast<int>(u));
    if (now == before[u]) continue;
    for (const auto& [off, id] : tiny_.contents(static_cast<int>(u))) res.moves.push_back({id, before[u] + off, now + off});
  }
}

void FlexAllocator::apply_delta(const TinyRef::Delta& d, UpdateResult& res) {
  for (int c = 0; c < d.created; ++c) {
    const int u = static_cast<int>(pi_.size());
    pi_.push_back(static_cast<int>(phys_.size()));
    phys_.push_back(u);
  }
  for (const auto& r : d.relocations)
    res.moves.push_back({r.id, unit_address(r.from.unit) + r.from.offset, unit_address(r.to.unit) + r.to.offset});
  if (d.destroyed) {
    const int u = d.destroyed_unit;
    const int slot = pi_.at(u);
    const int last = static_cast<int>(phys_.size()) - 1;
    if (slot != last) {
      const int v = phys_[last];
      const Tick from = unit_address(v);
      phys_[slot] = v;
      pi_[v] = slot;
      const Tick to = unit_address(v);
      for (const auto& [off, id] : tiny_.contents(v)) res.moves.push_back({id, from + off, to + off});
      ++unit_swaps_;
    }
    phys_.pop_back();
    pi_.pop_back();
  }
}

UpdateResult FlexAllocator::insert(ItemId id, Tick size) {
  if (size <= 0 || size > e4_) throw RegimeError("flex: item is not tiny");
  if (size_.count(id)) throw StructuralError("flex: duplicate id");
  UpdateResult res;
  auto d = tiny_.insert(id, size);
  size_[id] = size;
  apply_delta(d, res);
  res.placed_at = offset_of(id);
  coalesce(res);
  return res;
}

UpdateResult FlexAllocator::erase(ItemId id) {
  if (!size_.count(id)) throw StructuralError("flex: unknown id");
  UpdateResult res;
  auto d = tiny_.erase(id);
  size_.erase(id);
  apply_delta(d, res);
  coalesce(res);
  return res;
}

void FlexAllocator::rotate_into(std::int64_t r, int type, UpdateResult& res) {
  if (r == 0) return;
  const std::int64_t s = static_cast<std::int64_t>(phys_.size());
  const std::vector<Tick> before = unit_addresses();
  B_[type] += r * M_;
  sumB_ += r * M_;
  if (s == 0) return;
  const std::int64_t sh = ((r % s) + s) % s;
  std::rotate(phys_.begin(), phys_.begin() + sh, phys_.end());
  for (std::int64_t p = 0; p < s; ++p) pi_[phys_[p]] = static_cast<int>(p);
  emit_unit_moves(before, res);
  rotations_ += static_cast<std::uint64_t>(r < 0 ? -r : r);
}

UpdateResult FlexAllocator::rotate(std::int64_t r, int type) {
  if (phys_.empty()) throw StructuralError("flex: rotation with zero units");
  if (type < 1 || type > C_) throw std::invalid_argument("flex: bad update type");
  UpdateResult res;
  rotate_into(r, type, res);
  coalesce(res);
  return res;
}

void FlexAllocator::restore(int i, UpdateResult& res) {
  ++buffer_rebuilds_;
  const Tick lo = 7 * M_, hi = 9 * M_;
  if (phys_.empty()) {
    sumB_ += 8 * M_ - B_[i];
    B_[i] = 8 * M_;
    return;
  }
  std::int64_t r = 0;
  if (B_[i] < lo) r = (lo - B_[i] + M_ - 1) / M_;
  else if (B_[i] > hi) r = -((B_[i] - hi + M_ - 1) / M_);
  rotate_into(r, i, res);
}

UpdateResult FlexAllocator::external(Tick x, Push dir) {
  const int i = type_of(x);
  UpdateResult res;
  if (dir == Push::Right) {
    delta_ += x;
    B_[i] -= x;
    sumB_ -= x;
  } else {
    delta_ -= x;
    B_[i] += x;
    sumB_ += x;
  }
  if (i > Csmall_) {
    if (B_[i] < 0 || B_[i] > 16 * M_) restore(i, res);
  } else {
    Tick& P = dir == Push::Right ? P_[i] : Pl_[i];
    Tick& R = dir == Push::Right ? R_[i] : Rl_[i];
    P += x;
    if (P > R) {
      restore(i, res);
      P -= R;
      R = sample_R();
    }
  }
  coalesce(res);
  return res;
}

std::optional<std::string> FlexAllocator::self_check() const {
  Tick sum = 0;
  for (int i = 1; i <= C_; ++i) {
    if (B_[i] < 0 || B_[i] > 16 * M_) return "flex: B_" + std::to_string(i) + " outside [0, 16M]";
    sum += B_[i];
  }
  if (sum != sumB_) return "flex: buffer total out of sync";
  if (2 * sumB_ > cfg_.epsilon_ticks) return "flex: buffer total above eps/2";
  if (static_cast<int>(phys_.size()) != tiny_.units()) return "flex: unit count differs from tiny allocator";
  for (std::size_t p = 0; p < phys_.size(); ++p)
    if (pi_.at(phys_[p]) != static_cast<int>(p)) return "flex: permutation not inverse";
  for (int i = 1; i <= Csmall_; ++i)
    if (P_[i] > R_[i] || Pl_[i] > Rl_[i]) return "flex: push counter above threshold";
  if (delta_ < 0) return "flex: negative base";
  return std::nullopt;
}

AllocStats FlexAllocator::stats() const {
  AllocStats st;
  st.rebuilds = buffer_rebuilds_;
  st.extra["rotations"] = static_cast<double>(rotations_);
  st.extra["unit_swaps"] = static_cast<double>(unit_swaps_);
  st.extra["units"] = static_cast<double>(phys_.size());
  st.extra["buffer_total"] = cfg_.to_fraction(sumB_);
  return st;
}

// ---------------------------------------------------------------- Combined

TickConfig CombinedAllocator::geo_config(const TickConfig& cfg) {
  auto k = cfg.eps_log4();
  if (!k) throw std::invalid_argument("combined: epsilon must be 4^-k");
  return TickConfig::power_of_four(*k + 1, cfg.resolution_log2);
}

CombinedAllocator::CombinedAllocator(TickConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.check();
  const TickConfig g = geo_config(cfg_);
  geo_ = std::make_unique<GeoAllocator>(g, seed);
  flex_ = std::make_unique<FlexAllocator>(cfg_, seed ^ 0x9e3779b97f4a7c15ULL, g.epsilon_ticks);
}

void CombinedAllocator::append(UpdateResult& into, const UpdateResult& from) {
  into.moves.insert(into.moves.end(), from.moves.begin(), from.moves.end());
  into.resizes.insert(into.resizes.end(), from.resizes.begin(), from.resizes.end());
  if (from.placed_at >= 0) into.placed_at = from.placed_at;
}

UpdateResult CombinedAllocator::insert(ItemId id, Tick size) {
  if (size <= 0) throw RegimeError("combined: non-positive size");
  if (size_.count(id)) throw StructuralError("combined: duplicate id");
  if (is_tiny(size)) {
    UpdateResult res = flex_->insert(id, size);
    size_[id] = size;
    return res;
  }
  UpdateResult res = geo_->insert(id, size);
  size_[id] = size;
  L1_ += size;
  append(res, flex_->external(size, FlexAllocator::Push::Right));
  coalesce(res);
  return res;
}

UpdateResult CombinedAllocator::erase(ItemId id) {
  auto it = size_.find(id);
  if (it == size_.end()) throw StructuralError("combined: unknown id");
  const Tick size = it->second;
  size_.erase(it);
  if (is_tiny(size)) return flex_->erase(id);
  UpdateResult res = geo_->erase(id);
  L1_ -= size;
  append(res, flex_->external(size, FlexAllocator::Push::Left));
  coalesce(res);
  return res;
}

std::optional<std::string> CombinedAllocator::self_check() const {
  if (auto e = geo_->self_check()) return e;
  if (auto e = flex_->self_check()) return e;
  const Tick eg = geo_config(cfg_).epsilon_ticks;
  if (flex_->base() != L1_ + eg) return "combined: tiny region not flush after the large region";
  if (L1_ + geo_->inflation_gap() > flex_->base()) return "combined: large region overlaps tiny region";
  return std::nullopt;
}

AllocStats CombinedAllocator::stats() const {
  AllocStats st = geo_->stats();
  AllocStats f = flex_->stats();
  st.rebuilds += f.rebuilds;
  for (const auto& [k, v] : f.extra) st.extra["flex_" + k] = v;
  return st;
}

}  // namespace mrlab
