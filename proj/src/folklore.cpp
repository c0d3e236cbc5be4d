#include "mrlab/folklore.hpp"

#include <algorithm>

namespace mrlab {

FolkloreAllocator::FolkloreAllocator(TickConfig cfg) : cfg_(cfg) { cfg_.check(); }

Tick FolkloreAllocator::window_for(Tick k) const {
  Wide w = (static_cast<Wide>(2) * k * cfg_.memory() + cfg_.epsilon_ticks - 1) / cfg_.epsilon_ticks;
  return static_cast<Tick>(std::min<Wide>(w, cfg_.memory()));
}

void FolkloreAllocator::move(ItemId id, Tick to, std::vector<MoveRecord>& out) {
  Tick from = pos_.at(id);
  if (from == to) return;
  order_.erase(from);
  order_.emplace(to, id);
  pos_[id] = to;
  out.push_back({id, from, to});
}

UpdateResult FolkloreAllocator::compact_all_then_append(ItemId id, Tick size) {
  UpdateResult res;
  Tick cursor = 0;
  for (auto it = order_.begin(); it != order_.end();) {
    auto nx = std::next(it);
    ItemId cur = it->second;
    Tick s = size_.at(cur);
    move(cur, cursor, res.moves);
    cursor += s;
    it = nx;
  }
  ++fallbacks_;
  res.placed_at = cursor;
  order_.emplace(cursor, id);
  pos_[id] = cursor;
  size_[id] = size;
  present_ += size;
  return res;
}

UpdateResult FolkloreAllocator::insert(ItemId id, Tick k) {
  if (k <= 0) throw RegimeError("folklore: non-positive size");
  const Tick limit = std::min(cfg_.memory(), present_ + k + cfg_.epsilon_ticks);
  const Tick w = window_for(k);

  // Free space of window [j·w, (j+1)·w) is the total overlap of gaps with it;
  // walk the gaps in order and keep a running total for the current window.
  Tick ws = -1;
  {
    Tick cur = -1, free = 0, prev_end = 0;
    auto visit_gap = [&](Tick g0, Tick g1) {
      g1 = std::min(g1, limit);
      while (g0 < g1) {
        Tick idx = g0 / w;
        Tick wend = std::min(limit, (idx + 1) * w);
        if (idx != cur) {
          cur = idx;
          free = 0;
        }
        Tick piece = std::min(g1, wend) - g0;
        free += piece;
        if (free >= k) return idx * w;
        g0 += piece;
      }
      return Tick{-1};
    };
    for (auto it = order_.begin(); it != order_.end() && ws < 0 && prev_end < limit; ++it) {
      if (it->first > prev_end) ws = visit_gap(prev_end, it->first);
      prev_end = std::max(prev_end, it->first + size_.at(it->second));
    }
    if (ws < 0 && prev_end < limit) ws = visit_gap(prev_end, limit);
  }
  if (ws >= 0) {
    const Tick we = std::min(limit, ws + w);
    auto first = order_.lower_bound(ws);

    // sweep movable items left until a gap of k opens
    UpdateResult res;
    Tick cursor = ws;
    if (first != order_.begin()) {
      auto prev = std::prev(first);
      cursor = std::max(cursor, prev->first + size_.at(prev->second));
    }
    Tick bound = we;
    for (auto it = order_.lower_bound(ws); it != order_.end() && it->first < we;) {
      auto nx = std::next(it);
      Tick start = it->first;
      ItemId cur = it->second;
      Tick s = size_.at(cur);
      if (start - cursor >= k) break;
      if (start + s > we) {
        bound = start;
        break;
      }
      move(cur, cursor, res.moves);
      cursor += s;
      it = nx;
      bound = we;
    }
    auto nxt = order_.lower_bound(cursor);
    if (nxt != order_.end() && nxt->first < bound) bound = nxt->first;
    if (bound - cursor < k) throw AssertionFailure("folklore: window sweep found no gap");
    res.placed_at = cursor;
    order_.emplace(cursor, id);
    pos_[id] = cursor;
    size_[id] = k;
    present_ += k;
    return res;
  }
  return compact_all_then_append(id, k);
}

UpdateResult FolkloreAllocator::erase(ItemId id) {
  auto pit = pos_.find(id);
  if (pit == pos_.end()) throw StructuralError("folklore: unknown id");
  const Tick at = pit->second;
  order_.erase(at);
  present_ -= size_.at(id);
  pos_.erase(pit);
  size_.erase(id);

  UpdateResult res;
  if (order_.empty()) return res;
  auto last = std::prev(order_.end());
  Tick max_end = last->first + size_.at(last->second);
  if (max_end <= present_ + cfg_.epsilon_ticks) return res;

  ++lazy_compactions_;
  auto it = order_.lower_bound(at);
  Tick cursor = 0;
  if (it != order_.begin()) {
    auto prev = std::prev(it);
    cursor = prev->first + size_.at(prev->second);
  }
  while (it != order_.end()) {
    auto nx = std::next(it);
    ItemId cur = it->second;
    Tick s = size_.at(cur);
    move(cur, cursor, res.moves);
    cursor += s;
    it = nx;
  }
  return res;
}

AllocStats FolkloreAllocator::stats() const {
  AllocStats st;
  st.extra["fallbacks"] = static_cast<double>(fallbacks_);
  st.extra["lazy_compactions"] = static_cast<double>(lazy_compactions_);
  return st;
}

}  // namespace mrlab
