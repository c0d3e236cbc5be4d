#include "mrlab/simple.hpp"

#include <algorithm>
#include <cmath>

namespace mrlab {

SimpleAllocator::SimpleAllocator(TickConfig cfg) : cfg_(cfg) {
  cfg_.check();
  const long double eps = cfg_.to_fraction(cfg_.epsilon_ticks);
  const long double inv_cbrt = std::cbrt(1.0L / eps);
  const int classes = static_cast<int>(std::ceil(inv_cbrt - 1e-9L));
  period_ = std::max(1, static_cast<int>(std::floor(inv_cbrt + 1e-9L)));
  const long double width = std::pow(eps, 4.0L / 3.0L);
  bounds_.push_back(cfg_.epsilon_ticks);
  for (int i = 1; i <= classes; ++i) {
    long double b = std::ldexp(eps + i * width, cfg_.resolution_log2);
    bounds_.push_back(std::max(bounds_.back() + 1, static_cast<Tick>(std::ceil(b))));
  }
  bounds_.back() = std::max(bounds_.back(), 2 * cfg_.epsilon_ticks);
}

int SimpleAllocator::classify(Tick size) const {
  if (size < cfg_.epsilon_ticks || size >= 2 * cfg_.epsilon_ticks)
    throw RegimeError("simple: size outside [eps, 2 eps)");
  auto it = std::upper_bound(bounds_.begin(), bounds_.end(), size);
  return static_cast<int>(it - bounds_.begin());
}

Tick SimpleAllocator::waste() const {
  Tick w = 0;
  for (const auto& [id, inf] : info_) w += inf.logical - inf.size;
  return w;
}

void SimpleAllocator::relayout(std::size_t from, UpdateResult& res, ItemId skip) {
  Tick at = 0;
  if (from > 0) {
    ItemId prev = seq_[from - 1];
    at = pos_.at(prev) + info_.at(prev).logical;
  }
  for (std::size_t i = from; i < seq_.size(); ++i) {
    ItemId id = seq_[i];
    auto it = pos_.find(id);
    if (id != skip && it != pos_.end() && it->second != at) res.moves.push_back({id, it->second, at});
    pos_[id] = at;
    at += info_.at(id).logical;
  }
}

void SimpleAllocator::rebuild(UpdateResult& res) {
  ++rebuilds_;
  for (auto& [id, inf] : info_) {
    if (inf.logical != inf.size) {
      inf.logical = inf.size;
      res.resizes.push_back({id, inf.size});
    }
  }
  std::vector<std::vector<ItemId>> by_class(bounds_.size());
  for (ItemId id : seq_) by_class[info_.at(id).cls].push_back(id);
  // chosen[id] = distance from the top of its class's covering items
  std::unordered_map<ItemId, std::size_t> chosen;
  for (auto& members : by_class) {
    std::sort(members.begin(), members.end(), [&](ItemId a, ItemId b) {
      return std::pair(info_.at(a).size, a) < std::pair(info_.at(b).size, b);
    });
    std::size_t take = std::min<std::size_t>(members.size(), static_cast<std::size_t>(period_));
    for (std::size_t i = 0; i < take; ++i) chosen[members[i]] = take - 1 - i;
  }
  std::stable_partition(seq_.begin(), seq_.end(), [&](ItemId id) { return !chosen.count(id); });
  cover_ = seq_.size() - chosen.size();
  // Swap partners are taken from the top of a class, so the largest covering
  // item of every class goes last and compaction after a swap shifts little.
  std::sort(seq_.begin() + static_cast<std::ptrdiff_t>(cover_), seq_.end(), [&](ItemId a, ItemId b) {
    return std::tuple(chosen.at(b), info_.at(a).cls, a) < std::tuple(chosen.at(a), info_.at(b).cls, b);
  });
  relayout(0, res, ItemId(-1));
}

UpdateResult SimpleAllocator::rebuild_now() {
  UpdateResult res;
  rebuild(res);
  coalesce(res);
  return res;
}

void SimpleAllocator::maybe_rebuild(UpdateResult& res) {
  if (updates_ % static_cast<std::uint64_t>(period_) == 0) rebuild(res);
  ++updates_;
}

UpdateResult SimpleAllocator::insert(ItemId id, Tick size) {
  int cls = classify(size);
  if (info_.count(id)) throw StructuralError("simple: duplicate id");
  UpdateResult res;
  maybe_rebuild(res);
  Tick end = 0;
  if (!seq_.empty()) end = pos_.at(seq_.back()) + info_.at(seq_.back()).logical;
  info_[id] = Info{size, size, cls};
  pos_[id] = end;
  seq_.push_back(id);
  res.placed_at = end;
  coalesce(res);
  return res;
}

UpdateResult SimpleAllocator::erase(ItemId id) {
  auto found = info_.find(id);
  if (found == info_.end()) throw StructuralError("simple: unknown id");
  UpdateResult res;
  maybe_rebuild(res);
  const Info gone = info_.at(id);
  const std::size_t p = static_cast<std::size_t>(std::find(seq_.begin(), seq_.end(), id) - seq_.begin());
  if (p < cover_) {
    // largest covering item of the same class with logical size <= |I|
    std::size_t best = seq_.size();
    for (std::size_t q = cover_; q < seq_.size(); ++q) {
      const Info& c = info_.at(seq_[q]);
      if (c.cls != gone.cls || c.logical > gone.logical) continue;
      if (best == seq_.size()) {
        best = q;
        continue;
      }
      const Info& b = info_.at(seq_[best]);
      if (std::tuple(c.logical, c.size, seq_[q]) > std::tuple(b.logical, b.size, seq_[best])) best = q;
    }
    if (best == seq_.size()) throw AssertionFailure("simple: no covering item to swap with");
    ItemId sub = seq_[best];
    seq_.erase(seq_.begin() + static_cast<std::ptrdiff_t>(best));
    Tick slot = pos_.at(id);
    res.moves.push_back({sub, pos_.at(sub), slot});
    pos_[sub] = slot;
    info_.at(sub).logical = gone.logical;
    res.resizes.push_back({sub, gone.logical});
    seq_[p] = sub;
    ++swaps_;
    pos_.erase(id);
    info_.erase(id);
    relayout(cover_, res, id);
  } else {
    seq_.erase(seq_.begin() + static_cast<std::ptrdiff_t>(p));
    pos_.erase(id);
    info_.erase(id);
    relayout(p, res, id);
  }
  max_waste_ = std::max(max_waste_, waste());
  coalesce(res);
  // a rebuild at the start of this update may have shifted the departing item
  std::erase_if(res.moves, [id](const MoveRecord& m) { return m.id == id; });
  std::erase_if(res.resizes, [id](const LogicalResize& r) { return r.id == id; });
  return res;
}

std::optional<std::string> SimpleAllocator::self_check() const {
  Tick at = 0;
  std::vector<int> per_class(bounds_.size(), 0);
  for (std::size_t i = 0; i < seq_.size(); ++i) {
    ItemId id = seq_[i];
    if (pos_.at(id) != at) return "simple: layout not contiguous at item " + std::to_string(id);
    const Info& inf = info_.at(id);
    if (inf.logical < inf.size) return "simple: logical below true size";
    at += inf.logical;
    if (i >= cover_ && ++per_class[inf.cls] > 2 * period_) return "simple: covering class count above 2 floor(eps^-1/3)";
  }
  if (waste() > cfg_.epsilon_ticks) return "simple: waste above eps";
  return std::nullopt;
}

AllocStats SimpleAllocator::stats() const {
  AllocStats st;
  st.rebuilds = rebuilds_;
  st.max_waste = max_waste_;
  st.extra["swaps"] = static_cast<double>(swaps_);
  return st;
}

}  // namespace mrlab
