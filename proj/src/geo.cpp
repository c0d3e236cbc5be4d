#include "mrlab/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrlab {

namespace {

void drop_item(UpdateResult& res, ItemId id) {
  std::erase_if(res.moves, [id](const MoveRecord& m) { return m.id == id; });
  std::erase_if(res.resizes, [id](const LogicalResize& r) { return r.id == id; });
}

}  // namespace

GeoAllocator::GeoAllocator(TickConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
  cfg_.check();
  auto k = cfg_.eps_log4();
  if (!k || *k < 1) throw std::invalid_argument("geo: epsilon must be 4^-k with k >= 1");
  k_ = *k;
  if (cfg_.resolution_log2 < 10 * k_) throw std::invalid_argument("geo: resolution too coarse for eps^5");
  ell_ = 9 * k_;
  const int e5 = cfg_.resolution_log2 - 10 * k_;  // ε⁵ = 2^e5 ticks
  const long double beta = 1.0L + std::ldexp(1.0L, -k_);
  huge_ = ((Tick{1} << (cfg_.resolution_log2 - k_)) + 99) / 100;

  bound_.push_back(Tick{1} << e5);
  while (bound_.back() < huge_) {
    const int i = static_cast<int>(bound_.size());
    bound_.push_back(static_cast<Tick>(std::ceil(std::ldexp(std::pow(beta, static_cast<long double>(i)), e5))));
  }
  classes_ = static_cast<int>(bound_.size()) - 1;

  c_.assign(classes_ + 1, std::vector<std::int64_t>(ell_ + 2, 0));
  jstar_.assign(classes_ + 1, 0);
  at_label_.assign(classes_ + 1, std::vector<std::int64_t>(ell_ + 2, 0));
  touched_flag_.assign(classes_ + 1, 0);
  for (int d : {0, 1}) {
    r_[d].assign(classes_ + 1, std::vector<std::int64_t>(ell_ + 2, 0));
    t_[d].assign(classes_ + 1, std::vector<std::int64_t>(ell_ + 2, 0));
  }
  for (int i = 1; i <= classes_; ++i) {
    const long double bi = std::pow(beta, static_cast<long double>(i));
    c_[i][0] = std::numeric_limits<std::int64_t>::max();
    for (int j = 1; j <= ell_; ++j) {
      c_[i][j] = static_cast<std::int64_t>(std::floor(std::ldexp(1.0L, 9 * k_ + 1 - j) / bi));
      if (c_[i][j] >= 1) jstar_[i] = j;
    }
    for (int d : {0, 1})
      for (int j = 1; j <= jstar_[i]; ++j) r_[d][i][j] = sample_threshold(i, j);
  }
  by_class_.resize(classes_ + 1);
  T_ = sample_waste_threshold();
}

std::int64_t GeoAllocator::capacity(int i, int j) const {
  if (j > ell_) return 0;
  return c_[i][j];
}

Tick GeoAllocator::mass_limit(int j) const {
  if (j == 0) return cfg_.memory();
  return Tick{1} << (cfg_.resolution_log2 - 10 * k_ + ell_ - j + 1);
}

int GeoAllocator::classify(Tick size) const {
  if (size < bound_[0] || size >= huge_) throw RegimeError("geo: size outside [eps^5, eps^(1/2)/100)");
  return static_cast<int>(std::upper_bound(bound_.begin(), bound_.end(), size) - bound_.begin());
}

std::int64_t GeoAllocator::sample_threshold(int i, int j) {
  const std::int64_t c = c_[i][j];
  const std::int64_t lo = (c + 3) / 4, hi = (c + 2) / 3;
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
}

Tick GeoAllocator::sample_waste_threshold() {
  const Tick e = cfg_.epsilon_ticks;
  return std::uniform_int_distribution<Tick>(e / 2 + 1, e - 1)(rng_);
}

Tick GeoAllocator::inflation_gap() const {
  Tick g = 0;
  for (ItemId id : seq_) {
    const Info& inf = info_.at(id);
    g += inf.logical - inf.size;
  }
  return g;
}

std::size_t GeoAllocator::level_count(int i, int j) const {
  std::size_t n = 0;
  for (ItemId id : seq_) {
    const Info& inf = info_.at(id);
    if (inf.cls == i && inf.label >= j) ++n;
  }
  return n;
}

void GeoAllocator::relabel(int cls, int from, int to) {
  if (from >= 0) --at_label_[cls][from];
  if (to >= 0) ++at_label_[cls][to];
  if (!touched_flag_[cls]) {
    touched_flag_[cls] = 1;
    touched_.push_back(cls);
  }
}

std::optional<std::string> GeoAllocator::level_check() const {
  std::optional<std::string> err;
  for (int i : touched_) {
    touched_flag_[i] = 0;
    std::int64_t suffix = 0;
    for (int j = ell_; j >= 1 && !err; --j) {
      suffix += at_label_[i][j];
      if (suffix > 2 * c_[i][j])
        err = "geo: class " + std::to_string(i) + " level " + std::to_string(j) + " holds " + std::to_string(suffix) +
              " items, above 2c = " + std::to_string(2 * c_[i][j]);
    }
  }
  touched_.clear();
  return err;
}

std::size_t GeoAllocator::index_of(ItemId id) const {
  return static_cast<std::size_t>(std::find(seq_.begin(), seq_.end(), id) - seq_.begin());
}

void GeoAllocator::relayout(std::size_t from, UpdateResult& res) {
  Tick at = region_start();
  if (from > 0) {
    ItemId prev = seq_[from - 1];
    at = pos_.at(prev) + info_.at(prev).logical;
  }
  for (std::size_t i = from; i < seq_.size(); ++i) {
    ItemId id = seq_[i];
    Tick& p = pos_[id];
    if (p != at) res.moves.push_back({id, p, at});
    p = at;
    at += info_.at(id).logical;
  }
}

void GeoAllocator::relayout_huge(UpdateResult& res) {
  Tick at = 0;
  for (ItemId id : huge_items_) {
    Tick& p = pos_[id];
    if (p != at) res.moves.push_back({id, p, at});
    p = at;
    at += info_.at(id).size;
  }
}

void GeoAllocator::rebuild(int j0, UpdateResult& res) {
  const int lo = j0 - 1;
  auto first = std::partition_point(seq_.begin(), seq_.end(), [&](ItemId id) { return info_.at(id).label < lo; });
  const std::size_t start = static_cast<std::size_t>(first - seq_.begin());

  std::unordered_map<ItemId, int> newlev;
  for (int i : present_classes_) {
    const std::int64_t cap = c_[i][j0];
    int j = jstar_[i];
    std::int64_t rank = 0;
    for (auto it = by_class_[i].begin(); it != by_class_[i].end() && rank < cap; ++it, ++rank) {
      const ItemId member = std::get<2>(*it);
      while (rank >= c_[i][j]) --j;
      if (info_.at(member).label < lo)
        throw AssertionFailure("geo: class " + std::to_string(i) + " rank " + std::to_string(rank) +
                               " item outside level " + std::to_string(lo));
      newlev[member] = j;
    }
  }

  std::vector<std::pair<int, ItemId>> region;
  region.reserve(seq_.size() - start);
  for (std::size_t q = start; q < seq_.size(); ++q) {
    auto f = newlev.find(seq_[q]);
    region.push_back({f == newlev.end() ? lo : f->second, seq_[q]});
  }
  std::stable_sort(region.begin(), region.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t q = 0; q < region.size(); ++q) {
    seq_[start + q] = region[q].second;
    Info& inf = info_.at(region[q].second);
    relabel(inf.cls, inf.label, region[q].first);
    inf.label = region[q].first;
  }
  relayout(start, res);
  ++rebuilds_;
}

void GeoAllocator::count_and_rebuild(Dir d, int i, UpdateResult& res) {
  const int js = jstar_[i];
  int j0 = 0;
  for (int j = 1; j <= js; ++j) {
    if (++t_[d][i][j] >= r_[d][i][j] && j0 == 0) j0 = j;
  }
  if (j0 == 0) return;
  rebuild(j0, res);
  last_j0_ = j0;
  for (int j = j0; j <= js; ++j) {
    if (t_[d][i][j] >= r_[d][i][j]) {
      t_[d][i][j] = 0;
      r_[d][i][j] = sample_threshold(i, j);
    }
  }
}

void GeoAllocator::recover(UpdateResult& res) {
  ++recoveries_;
  last_recovered_ = true;
  for (ItemId id : seq_) {
    Info& inf = info_.at(id);
    if (inf.logical != inf.size || inf.tie != id) {
      by_class_[inf.cls].erase(key_of(id, inf));
      if (inf.logical != inf.size) res.resizes.push_back({id, inf.size});
      inf.logical = inf.size;
      inf.tie = id;
      by_class_[inf.cls].insert(key_of(id, inf));
    }
  }
  relayout(0, res);
  rebuild(1, res);
  waste_ -= T_;
  T_ = sample_waste_threshold();
}

UpdateResult GeoAllocator::insert(ItemId id, Tick size) {
  if (info_.count(id)) throw StructuralError("geo: duplicate id");
  last_j0_ = 0;
  last_recovered_ = false;
  UpdateResult res;
  if (is_huge(size)) {
    ++huge_ops_;
    info_[id] = Info{size, size, 0, 0, id};
    pos_[id] = huge_mass_;
    huge_items_.push_back(id);
    res.placed_at = huge_mass_;
    huge_mass_ += size;
    relayout(0, res);
    coalesce(res);
    return res;
  }
  const int cls = classify(size);
  Tick at = region_start();
  if (!seq_.empty()) at = pos_.at(seq_.back()) + info_.at(seq_.back()).logical;
  info_[id] = Info{size, size, cls, ell_, id};
  pos_[id] = at;
  seq_.push_back(id);
  by_class_[cls].insert(key_of(id, info_[id]));
  present_classes_.insert(cls);
  relabel(cls, -1, ell_);
  count_and_rebuild(Ins, cls, res);
  coalesce(res);
  drop_item(res, id);
  res.placed_at = pos_.at(id);
  return res;
}

UpdateResult GeoAllocator::erase(ItemId id) {
  auto found = info_.find(id);
  if (found == info_.end()) throw StructuralError("geo: unknown id");
  last_j0_ = 0;
  last_recovered_ = false;
  const Info gone = found->second;
  const Tick slot = pos_.at(id);
  UpdateResult res;

  if (gone.cls == 0) {
    ++huge_ops_;
    huge_items_.erase(std::find(huge_items_.begin(), huge_items_.end(), id));
    info_.erase(found);
    pos_.erase(id);
    huge_mass_ -= gone.size;
    relayout_huge(res);
    relayout(0, res);
    coalesce(res);
    return res;
  }

  const int i = gone.cls;
  const int js = jstar_[i];
  by_class_[i].erase(key_of(id, gone));
  if (by_class_[i].empty()) present_classes_.erase(i);
  const std::size_t p = index_of(id);
  relabel(i, gone.label, -1);

  if (gone.label < js) {
    // smallest class-i item in level j*_i takes the slot and I's rank key
    auto lvl = std::partition_point(seq_.begin(), seq_.end(), [&](ItemId x) { return info_.at(x).label < js; });
    std::size_t q = seq_.size();
    for (auto it = lvl; it != seq_.end(); ++it) {
      const Info& c = info_.at(*it);
      if (c.cls != i) continue;
      std::size_t at = static_cast<std::size_t>(it - seq_.begin());
      if (q == seq_.size() || key_of(*it, c) < key_of(seq_[q], info_.at(seq_[q]))) q = at;
    }
    if (q == seq_.size()) throw AssertionFailure("geo: no class-" + std::to_string(i) + " item in level j*");
    const ItemId sub = seq_[q];
    Info& si = info_.at(sub);
    if (si.size > gone.logical) throw AssertionFailure("geo: swap partner larger than the deleted slot");
    seq_.erase(seq_.begin() + static_cast<std::ptrdiff_t>(q));
    seq_[p] = sub;
    relabel(i, si.label, gone.label);
    si.label = gone.label;
    by_class_[i].erase(key_of(sub, si));
    if (si.logical != gone.logical) res.resizes.push_back({sub, gone.logical});
    si.logical = gone.logical;
    si.tie = gone.tie;
    by_class_[i].insert(key_of(sub, si));
    res.moves.push_back({sub, pos_.at(sub), slot});
    pos_[sub] = slot;
    ++swaps_;
    info_.erase(id);
    pos_.erase(id);
    relayout(q, res);
  } else {
    seq_.erase(seq_.begin() + static_cast<std::ptrdiff_t>(p));
    info_.erase(id);
    pos_.erase(id);
    relayout(p, res);
  }

  waste_ += (bound_[i] + (Tick{1} << k_) - 1) >> k_;
  count_and_rebuild(Del, i, res);
  if (waste_ >= T_) recover(res);
  max_gap_ = std::max(max_gap_, inflation_gap());
  coalesce(res);
  drop_item(res, id);
  return res;
}

std::optional<std::string> GeoAllocator::self_check() const {
  Tick at = 0;
  for (ItemId id : huge_items_) {
    if (pos_.at(id) != at) return "geo: huge prefix not contiguous";
    at += info_.at(id).size;
  }
  std::unordered_map<int, std::vector<std::int64_t>> cnt;
  int prev_label = 0;
  for (ItemId id : seq_) {
    const Info& inf = info_.at(id);
    if (pos_.at(id) != at) return "geo: non-huge region not contiguous at item " + std::to_string(id);
    if (inf.logical < inf.size) return "geo: logical below true size";
    if (inf.logical >= bound_[inf.cls]) return "geo: logical size left its class";
    if (inf.label < prev_label) return "geo: level labels not nondecreasing";
    prev_label = inf.label;
    at += inf.logical;
    auto& v = cnt[inf.cls];
    if (v.empty()) v.assign(ell_ + 2, 0);
    ++v[inf.label];
  }
  for (auto& [i, v] : cnt) {
    std::int64_t suffix = 0;
    for (int j = ell_; j >= 1; --j) {
      suffix += v[j];
      if (suffix > 2 * c_[i][j])
        return "geo: level size invariant broken for class " + std::to_string(i) + " level " + std::to_string(j);
    }
    const ItemId smallest = std::get<2>(*by_class_[i].begin());
    if (info_.at(smallest).label < jstar_[i]) return "geo: smallest of class " + std::to_string(i) + " not in j*";
  }
  const Tick gap = inflation_gap();
  if (gap > waste_) return "geo: inflation gap above waste counter";
  if (waste_ >= T_) return "geo: waste counter at or above threshold";
  return std::nullopt;
}

AllocStats GeoAllocator::stats() const {
  AllocStats st;
  st.rebuilds = rebuilds_;
  st.max_waste = max_gap_;
  st.extra["recoveries"] = static_cast<double>(recoveries_);
  st.extra["swaps"] = static_cast<double>(swaps_);
  st.extra["huge_ops"] = static_cast<double>(huge_ops_);
  st.extra["classes"] = classes_;
  st.extra["levels"] = ell_;
  return st;
}

}  // namespace mrlab
