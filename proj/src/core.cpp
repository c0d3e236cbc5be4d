#include "mrlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mrlab {

double TickConfig::epsilon() const {
  return std::ldexp(static_cast<double>(epsilon_ticks), -resolution_log2);
}

std::optional<int> TickConfig::eps_log4() const {
  if (epsilon_ticks <= 0 || (epsilon_ticks & (epsilon_ticks - 1)) != 0) return std::nullopt;
  int e = 0;
  while ((Tick{1} << e) != epsilon_ticks) ++e;
  int shift = resolution_log2 - e;
  if (shift % 2 != 0) return std::nullopt;
  return shift / 2;
}

Tick TickConfig::pow2_frac(int e) const {
  if (e < 0 || e > resolution_log2) throw std::invalid_argument("pow2_frac: exponent out of range");
  return Tick{1} << (resolution_log2 - e);
}

Tick TickConfig::from_fraction(long double x) const {
  return static_cast<Tick>(std::llround(std::ldexp(x, resolution_log2)));
}

long double TickConfig::to_fraction(Tick t) const {
  return std::ldexp(static_cast<long double>(t), -resolution_log2);
}

void TickConfig::check() const {
  if (resolution_log2 < 30 || resolution_log2 > 62)
    throw std::invalid_argument("resolution_log2 must lie in [30, 62]");
  if (epsilon_ticks <= 0 || epsilon_ticks > memory())
    throw std::invalid_argument("epsilon_ticks must lie in (0, memory]");
}

TickConfig TickConfig::power_of_four(int k, int resolution_log2) {
  if (k < 1 || 2 * k > resolution_log2) throw std::invalid_argument("epsilon 4^-k not representable");
  TickConfig cfg{resolution_log2, Tick{1} << (resolution_log2 - 2 * k)};
  cfg.check();
  return cfg;
}

Tick Layout::offset(ItemId id) const {
  auto it = pos_.find(id);
  if (it == pos_.end()) throw StructuralError("layout: unknown id " + std::to_string(id));
  return it->second;
}

void Layout::place(ItemId id, Tick at) {
  auto it = pos_.find(id);
  if (it != pos_.end()) {
    order_.erase({it->second, id});
    it->second = at;
  } else {
    pos_.emplace(id, at);
  }
  order_.insert({at, id});
}

void Layout::erase(ItemId id) {
  auto it = pos_.find(id);
  if (it == pos_.end()) throw StructuralError("layout: unknown id " + std::to_string(id));
  order_.erase({it->second, id});
  pos_.erase(it);
}

void Layout::clear() {
  pos_.clear();
  order_.clear();
}

std::string ValidityReport::describe() const {
  std::ostringstream os;
  for (auto [a, b] : overlaps) os << "overlap " << a << "/" << b << "; ";
  for (auto a : out_of_bounds) os << "out-of-bounds " << a << "; ";
  if (window_violation) os << "window: max_end " << max_end << " > " << window_limit << "; ";
  return os.str();
}

namespace {

const Item& lookup(const ItemTable& items, ItemId id) {
  auto it = items.find(id);
  if (it == items.end()) throw StructuralError("unknown item id " + std::to_string(id));
  return it->second;
}

// Checks the neighbours of one placed item in the ordered index.
std::optional<std::string> neighbour_conflict(const Layout& layout, const ItemTable& items, Tick memory,
                                              ItemId id) {
  Tick at = layout.offset(id);
  Tick end = at + lookup(items, id).logical_size;
  if (at < 0 || end > memory) return "item " + std::to_string(id) + " out of bounds";
  const auto& ord = layout.ordered();
  auto it = ord.find({at, id});
  if (it != ord.begin()) {
    auto prev = std::prev(it);
    if (prev->first + lookup(items, prev->second).logical_size > at)
      return "items " + std::to_string(prev->second) + " and " + std::to_string(id) + " overlap";
  }
  auto next = std::next(it);
  if (next != ord.end() && next->first < end)
    return "items " + std::to_string(id) + " and " + std::to_string(next->second) + " overlap";
  return std::nullopt;
}

}  // namespace

ValidityReport validate_layout(const Layout& layout, const ItemTable& items, const TickConfig& cfg,
                               bool resizable) {
  ValidityReport rep;
  Tick present = 0;
  Tick reach = 0;
  ItemId reach_id = 0;
  bool any = false;
  for (auto [at, id] : layout.ordered()) {
    const Item& it = lookup(items, id);
    Tick end = at + it.logical_size;
    present += it.true_size;
    if (at < 0 || end > cfg.memory()) rep.out_of_bounds.push_back(id);
    if (any && reach > at) rep.overlaps.emplace_back(reach_id, id);
    if (!any || end > reach) {
      reach = end;
      reach_id = id;
    }
    any = true;
  }
  rep.max_end = reach;
  rep.window_limit = present + cfg.epsilon_ticks;
  if (resizable && any && reach > rep.window_limit) rep.window_violation = true;
  return rep;
}

void apply_moves(Layout& layout, const ItemTable& items, const std::vector<MoveRecord>& moves) {
  std::vector<std::pair<ItemId, Tick>> saved;
  saved.reserve(moves.size());
  for (const auto& m : moves) {
    if (!layout.contains(m.id) || items.find(m.id) == items.end())
      throw StructuralError("apply_moves: unknown id " + std::to_string(m.id));
    saved.emplace_back(m.id, layout.offset(m.id));
  }
  for (const auto& m : moves) layout.place(m.id, m.to);
  Tick memory = Tick{1} << 62;
  for (const auto& m : moves) {
    if (auto err = neighbour_conflict(layout, items, memory, m.id)) {
      for (auto [id, at] : saved) layout.place(id, at);
      throw StructuralError("apply_moves: " + *err);
    }
  }
}

void CostLedger::add(Tick update_size, Tick moved_mass) {
  if (update_size <= 0 || moved_mass < 0) throw std::invalid_argument("cost record out of range");
  records_.push_back({update_size, moved_mass});
}

Metrics amortized_metrics(const CostLedger& ledger) {
  if (ledger.empty()) throw std::invalid_argument("amortized_metrics: empty ledger");
  long double sum_ratio = 0, sum_l = 0, sum_k = 0;
  for (const auto& r : ledger.records()) {
    sum_ratio += static_cast<long double>(r.moved_mass) / r.update_size;
    sum_l += r.moved_mass;
    sum_k += r.update_size;
  }
  return {static_cast<double>(sum_ratio / ledger.size()), static_cast<double>(sum_l / sum_k)};
}

Tick World::max_end() const {
  if (layout_.empty()) return 0;
  auto [at, id] = *layout_.ordered().rbegin();
  return at + items_.at(id).logical_size;
}

void World::insert_checked(ItemId id) {
  if (auto err = neighbour_conflict(layout_, items_, cfg_.memory(), id)) throw StructuralError(*err);
}

Tick World::apply(const UpdateEvent& ev, const UpdateResult& res) {
  if (ev.kind == EventKind::Insert) {
    if (items_.count(ev.id)) throw StructuralError("insert of present id " + std::to_string(ev.id));
    if (ev.size <= 0) throw StructuralError("insert of non-positive size");
    if (res.placed_at < 0) throw StructuralError("insert without placement");
    items_.emplace(ev.id, Item{ev.id, ev.size, ev.size});
    present_mass_ += ev.size;
  } else {
    auto it = items_.find(ev.id);
    if (it == items_.end()) throw StructuralError("delete of absent id " + std::to_string(ev.id));
    present_mass_ -= it->second.true_size;
    layout_.erase(ev.id);
    items_.erase(it);
  }
  for (const auto& r : res.resizes) {
    auto it = items_.find(r.id);
    if (it == items_.end()) throw StructuralError("resize of absent id " + std::to_string(r.id));
    if (r.logical < it->second.true_size) throw StructuralError("logical size below true size");
    it->second.logical_size = r.logical;
  }
  Tick moved = 0;
  for (const auto& m : res.moves) {
    auto it = items_.find(m.id);
    if (it == items_.end() || !layout_.contains(m.id))
      throw StructuralError("move of absent id " + std::to_string(m.id));
    if (layout_.offset(m.id) != m.from) throw StructuralError("move source mismatch for " + std::to_string(m.id));
    layout_.place(m.id, m.to);
    moved += it->second.true_size;
  }
  if (ev.kind == EventKind::Insert) layout_.place(ev.id, res.placed_at);
  for (const auto& m : res.moves) insert_checked(m.id);
  for (const auto& r : res.resizes) insert_checked(r.id);
  if (ev.kind == EventKind::Insert) insert_checked(ev.id);
  return moved;
}

Tick World::apply_moves_only(const std::vector<MoveRecord>& moves) {
  Tick moved = 0;
  for (const auto& m : moves) {
    if (layout_.offset(m.id) != m.from) throw StructuralError("move source mismatch for " + std::to_string(m.id));
    layout_.place(m.id, m.to);
    moved += items_.at(m.id).true_size;
  }
  for (const auto& m : moves) insert_checked(m.id);
  return moved;
}

std::vector<MoveRecord> diff_offsets(const std::unordered_map<ItemId, Tick>& before,
                                     const std::unordered_map<ItemId, Tick>& after) {
  std::vector<MoveRecord> out;
  for (auto [id, to] : after) {
    auto it = before.find(id);
    if (it != before.end() && it->second != to) out.push_back({id, it->second, to});
  }
  std::sort(out.begin(), out.end(), [](const MoveRecord& a, const MoveRecord& b) { return a.id < b.id; });
  return out;
}

void coalesce(UpdateResult& res) {
  std::vector<MoveRecord> merged;
  std::unordered_map<ItemId, std::size_t> at;
  for (const auto& m : res.moves) {
    auto it = at.find(m.id);
    if (it == at.end()) {
      at.emplace(m.id, merged.size());
      merged.push_back(m);
    } else {
      merged[it->second].to = m.to;
    }
  }
  std::erase_if(merged, [](const MoveRecord& m) { return m.from == m.to; });
  res.moves = std::move(merged);
  std::vector<LogicalResize> rs;
  std::unordered_map<ItemId, std::size_t> rat;
  for (const auto& r : res.resizes) {
    auto it = rat.find(r.id);
    if (it == rat.end()) {
      rat.emplace(r.id, rs.size());
      rs.push_back(r);
    } else {
      rs[it->second].logical = r.logical;
    }
  }
  res.resizes = std::move(rs);
}

Tick mul_div_ceil(Tick a, Tick b, Tick c) {
  Wide p = static_cast<Wide>(a) * b;
  return static_cast<Tick>((p + c - 1) / c);
}

Tick mul_div_floor(Tick a, Tick b, Tick c) {
  return static_cast<Tick>(static_cast<Wide>(a) * b / c);
}

std::uint64_t layout_hash(const Layout& layout, const ItemTable& items) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [at, id] : layout.ordered()) {
    mix(static_cast<std::uint64_t>(at));
    mix(id);
    mix(static_cast<std::uint64_t>(items.at(id).logical_size));
  }
  return h;
}

}  // namespace mrlab
