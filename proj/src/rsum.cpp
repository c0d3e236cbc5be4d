#include "mrlab/rsum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mrlab {

std::optional<std::uint64_t> subset_sum_in_range(const std::vector<Tick>& sizes, Tick lo, Tick hi) {
  const std::size_t n = sizes.size();
  if (n > 64) throw std::invalid_argument("subset sum: more than 64 sizes");
  if (lo > hi) return std::nullopt;
  const std::size_t h = n / 2, nb = n - h;

  // low half: (sum, mask) sorted by sum, with a sparse table of minimum masks
  const std::size_t na = std::size_t{1} << h;
  std::vector<Wide> sa(na, 0);
  for (std::size_t mask = 1; mask < na; ++mask) {
    const int bit = std::countr_zero(mask);
    sa[mask] = sa[mask & (mask - 1)] + sizes[bit];
  }
  std::vector<std::uint64_t> order(na);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::uint64_t a, std::uint64_t b) {
    return sa[a] != sa[b] ? sa[a] < sa[b] : a < b;
  });
  std::vector<Wide> sorted(na);
  for (std::size_t q = 0; q < na; ++q) sorted[q] = sa[order[q]];
  std::vector<std::vector<std::uint64_t>> mn{order};
  for (std::size_t len = 2; len <= na; len *= 2) {
    const auto& prev = mn.back();
    std::vector<std::uint64_t> cur(na - len + 1);
    for (std::size_t q = 0; q + len <= na; ++q) cur[q] = std::min(prev[q], prev[q + len / 2]);
    mn.push_back(std::move(cur));
  }
  auto range_min = [&](std::size_t a, std::size_t b) {  // [a, b)
    const int lvl = std::bit_width(b - a) - 1;
    return std::min(mn[lvl][a], mn[lvl][b - (std::size_t{1} << lvl)]);
  };

  // high half in increasing mask order, so the first hit has the smallest high part
  const std::uint64_t nbm = nb == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << nb) - 1;
  for (std::uint64_t mask = 0;; ++mask) {
    Wide sb = 0;
    for (std::uint64_t m = mask; m; m &= m - 1) sb += sizes[h + std::countr_zero(m)];
    const Wide a_lo = static_cast<Wide>(lo) - sb, a_hi = static_cast<Wide>(hi) - sb;
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), a_lo) - sorted.begin();
    const auto last = std::upper_bound(sorted.begin(), sorted.end(), a_hi) - sorted.begin();
    if (first < last) return range_min(first, last) | (mask << h);
    if (mask == nbm) break;
  }
  return std::nullopt;
}

std::pair<std::size_t, std::size_t> grow_window(const std::vector<Tick>& sizes, std::size_t at, Tick lo, Tick /*hi*/) {
  std::size_t l = at, r = at + 1;
  Tick sum = sizes.at(at);
  while (sum < lo) {
    if (r < sizes.size()) sum += sizes[r++];
    else if (l > 0) sum += sizes[--l];
    else break;
  }
  return {l, r};
}

RsumAllocator::RsumAllocator(TickConfig cfg, Tick delta, std::uint64_t seed) : cfg_(cfg), delta_(delta), rng_(seed) {
  cfg_.check();
  if (delta_ <= 0 || 2 * delta_ > cfg_.memory()) throw std::invalid_argument("rsum: delta out of range");
  const long double log_inv_eps = std::log2(static_cast<long double>(cfg_.memory()) / cfg_.epsilon_ticks);
  m_ = 2 * static_cast<int>(std::ceil(log_inv_eps / 2 - 1e-12L));
  if (m_ < 4) throw std::invalid_argument("rsum: epsilon must be at most 1/16");
  g_ = static_cast<Tick>(std::floor(static_cast<long double>(cfg_.epsilon_ticks) * delta_ / cfg_.memory() * log_inv_eps));
  const long double inv_delta = static_cast<long double>(cfg_.memory()) / delta_;
  const long double a = inv_delta / (8 * m_), b = inv_delta / (6 * m_);
  r_lo_ = static_cast<std::int64_t>(std::floor(a)) + 1;
  r_hi_ = static_cast<std::int64_t>(std::ceil(b)) - 1;
  if (r_lo_ > r_hi_) r_lo_ = r_hi_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(b)));
  stash_mode_ = 4 * delta_ > cfg_.epsilon_ticks;
  r_ = sample_r();
}

std::int64_t RsumAllocator::sample_r() { return std::uniform_int_distribution<std::int64_t>(r_lo_, r_hi_)(rng_); }

Tick RsumAllocator::read(ItemId id) {
  const int g = grp_.at(id);
  if (g >= 0 && blocks_[g].valid && g != probing_) ++purity_violations_;
  return size_.at(id);
}

void RsumAllocator::move(ItemId id, Tick to, UpdateResult& res) {
  Tick& p = pos_.at(id);
  if (p == to) return;
  res.moves.push_back({id, p, to});
  p = to;
}

void RsumAllocator::invalidate(int b) {
  if (!blocks_[b].valid) return;
  blocks_[b].valid = false;
  --valid_count_;
  ++invalidations_;
  ++last_invalidations_;
}

int RsumAllocator::final_valid() const {
  for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b)
    if (blocks_[b].valid) return b;
  return -1;
}

std::vector<ItemId>& RsumAllocator::group(int g) {
  if (g == kHead) return head_;
  if (g == kTrash) return trash_;
  return blocks_.at(g).items;
}

void RsumAllocator::sort_group(int g) {
  auto& v = group(g);
  std::sort(v.begin(), v.end(), [&](ItemId a, ItemId b) { return pos_.at(a) < pos_.at(b); });
}

std::vector<ItemId> RsumAllocator::trash_members() const { return trash_; }

Tick RsumAllocator::main_end() const { return blocks_.empty() ? head_end_ : blocks_.back().end; }

Tick RsumAllocator::buffer_gap() const { return trash_.empty() ? 0 : tc_start_ - main_end(); }

Tick RsumAllocator::trash_end() const {
  if (trash_.empty()) return tc_start_;
  return pos_.at(trash_.back()) + size_.at(trash_.back());
}

void RsumAllocator::detach(ItemId id) {
  auto& v = group(grp_.at(id));
  v.erase(std::find(v.begin(), v.end(), id));
  size_.erase(id);
  pos_.erase(id);
  grp_.erase(id);
}

void RsumAllocator::rebuild(std::optional<ItemId> dropping, UpdateResult& res) {
  ++rebuilds_;
  last_rebuilt_ = true;
  if (dropping && size_.count(*dropping)) {
    present_ -= size_.at(*dropping);
    detach(*dropping);
  }
  std::vector<ItemId> all;
  all.reserve(size_.size());
  for (const auto& [id, s] : size_) all.push_back(id);
  std::sort(all.begin(), all.end());
  std::shuffle(all.begin(), all.end(), rng_);

  head_.clear();
  trash_.clear();
  blocks_.clear();
  valid_count_ = 0;
  const std::size_t n = all.size();
  const std::size_t h = n % static_cast<std::size_t>(m_);
  Tick cursor = 0;
  for (std::size_t q = 0; q < h; ++q) {
    move(all[q], cursor, res);
    cursor += size_.at(all[q]);
    head_.push_back(all[q]);
    grp_[all[q]] = kHead;
  }
  head_end_ = cursor;
  for (std::size_t q = h; q < n; q += m_) {
    Block b;
    b.start = cursor;
    for (std::size_t t = q; t < q + m_; ++t) {
      move(all[t], cursor, res);
      cursor += size_.at(all[t]);
      b.items.push_back(all[t]);
      grp_[all[t]] = static_cast<int>(blocks_.size());
    }
    b.end = cursor;
    blocks_.push_back(std::move(b));
    ++valid_count_;
  }
  tc_start_ = cursor;
  r_ = sample_r();
}

std::optional<std::uint64_t> RsumAllocator::probe(int b, Tick lo, Tick hi) {
  ++probes_;
  ++last_probes_;
  probing_ = b;
  std::vector<Tick> sz;
  for (ItemId id : blocks_[b].items) sz.push_back(read(id));
  probing_ = -1000;
  return subset_sum_in_range(sz, lo, hi);
}

void RsumAllocator::push_from(int b, UpdateResult& res) {
  if (b >= static_cast<int>(blocks_.size())) return;
  const Tick anchor = trash_.empty() ? main_end() : tc_start_;
  std::vector<ItemId> pushed;
  Tick mass = 0;
  for (std::size_t q = b; q < blocks_.size(); ++q)
    for (ItemId id : blocks_[q].items) {
      if (blocks_[q].valid) throw AssertionFailure("rsum: pushing a valid block");
      pushed.push_back(id);
      mass += read(id);
    }
  Tick cursor = anchor - mass;
  for (ItemId id : pushed) {
    move(id, cursor, res);
    cursor += size_.at(id);
    grp_[id] = kTrash;
  }
  trash_.insert(trash_.begin(), pushed.begin(), pushed.end());
  tc_start_ = anchor - mass;
  blocks_.resize(b);
}

void RsumAllocator::fix_buffer(UpdateResult& res) {
  const Tick limit = cfg_.epsilon_ticks / 2;
  if (trash_.empty()) {
    tc_start_ = main_end();
    return;
  }
  while (buffer_gap() > limit) {
    const ItemId t = trash_.back();
    const Tick s = size_.at(t);
    if (s > buffer_gap()) {
      if (!stash_mode_) throw AssertionFailure("rsum: buffer smaller than the rotated item");
      // the final item no longer fits in the buffer: stash instead
      while (!trash_.empty() && buffer_gap() > limit)
        if (!stash_cycle(res)) return;
      return;
    }
    move(t, tc_start_ - s, res);
    tc_start_ -= s;
    trash_.pop_back();
    trash_.insert(trash_.begin(), t);
  }
}

// One stash attempt per loop turn; false when a rebuild took over.
bool RsumAllocator::stash_cycle(UpdateResult& res) {
  const Tick c = window_center();
  while (true) {
    const int b = final_valid();
    if (b < 0 || static_cast<std::int64_t>(valid_count_) - 1 < r_) {
      rebuild(std::nullopt, res);
      return false;
    }
    push_from(b + 1, res);
    const Tick bstart = blocks_[b].start;
    Tick d = tc_start_ - bstart;
    std::size_t rotated = 0;
    while (d > c + delta_ && rotated < trash_.size()) {
      d -= size_.at(trash_[trash_.size() - 1 - rotated]);
      ++rotated;
    }
    ++last_stash_;
    std::optional<std::uint64_t> mask;
    if (d <= c + delta_) mask = probe(b, d - cfg_.epsilon_ticks / 2, d);
    if (!mask) {
      invalidate(b);
      push_from(b, res);
      continue;
    }
    for (std::size_t q = 0; q < rotated; ++q) {
      const ItemId t = trash_.back();
      const Tick s = size_.at(t);
      move(t, tc_start_ - s, res);
      tc_start_ -= s;
      trash_.pop_back();
      trash_.insert(trash_.begin(), t);
    }
    const std::vector<ItemId> items = blocks_[b].items;
    std::vector<ItemId> S, rest;
    Tick z = 0;
    for (std::size_t q = 0; q < items.size(); ++q) {
      if (*mask >> q & 1) {
        S.push_back(items[q]);
        z += size_.at(items[q]);
      } else {
        rest.push_back(items[q]);
      }
    }
    // S flush against the front of the trash can, the rest after its end
    Tick cursor = trash_end();
    Tick front = tc_start_ - z;
    for (ItemId id : S) {
      move(id, front, res);
      front += size_.at(id);
    }
    for (ItemId id : rest) {
      move(id, cursor, res);
      cursor += size_.at(id);
    }
    tc_start_ -= z;
    for (ItemId id : items) grp_[id] = kTrash;
    trash_.insert(trash_.begin(), S.begin(), S.end());
    trash_.insert(trash_.end(), rest.begin(), rest.end());
    blocks_[b].valid = false;
    --valid_count_;
    blocks_.pop_back();
    ++stashes_;
    return true;
  }
}

UpdateResult RsumAllocator::insert(ItemId id, Tick size) {
  if (size < delta_ || size > 2 * delta_) throw RegimeError("rsum: size outside [delta, 2 delta]");
  if (size_.count(id)) throw StructuralError("rsum: duplicate id");
  // past the final item; with an empty trash can that is the main-body end
  const Tick at = trash_.empty() ? main_end() : trash_end();
  if (trash_.empty()) tc_start_ = at;
  size_[id] = size;
  pos_[id] = at;
  grp_[id] = kTrash;
  trash_.push_back(id);
  present_ += size;
  max_gap_ = std::max(max_gap_, at + size - present_);
  UpdateResult res;
  res.placed_at = at;
  return res;
}

UpdateResult RsumAllocator::erase(ItemId id) {
  if (!size_.count(id)) throw StructuralError("rsum: unknown id");
  ++deletes_;
  last_probes_ = last_invalidations_ = last_stash_ = 0;
  last_rebuilt_ = false;
  UpdateResult res;
  auto finish = [&]() {
    coalesce(res);
    std::erase_if(res.moves, [id](const MoveRecord& mv) { return mv.id == id; });
    Tick end = 0;
    if (!trash_.empty()) end = trash_end();
    else if (!blocks_.empty()) end = blocks_.back().end;
    else end = head_end_;
    max_gap_ = std::max(max_gap_, end - present_);
    return res;
  };
  auto do_rebuild = [&]() {
    rebuild(id, res);
    return finish();
  };

  if (below_threshold() || final_valid() < 0) return do_rebuild();

  const int gx = grp_.at(id);
  if (gx >= 0) {
    invalidate(gx);
    if (below_threshold()) return do_rebuild();
  }
  const std::vector<ItemId> G = group(gx);
  std::vector<Tick> gs;
  gs.reserve(G.size());
  for (ItemId q : G) gs.push_back(read(q));
  const std::size_t at = std::find(G.begin(), G.end(), id) - G.begin();
  const Tick c = window_center();
  const auto [l, r] = grow_window(gs, at, c - delta_, c + delta_);
  const std::vector<ItemId> Y(G.begin() + l, G.begin() + r);
  const Tick y = std::accumulate(gs.begin() + l, gs.begin() + r, Tick{0});
  if (y < c - delta_) ++short_y_;

  int b = -1;
  std::optional<std::uint64_t> mask;
  while (true) {
    b = final_valid();
    if (b < 0 || static_cast<std::int64_t>(valid_count_) - 1 < r_) return do_rebuild();
    mask = probe(b, y - g_, y);
    if (mask) break;
    invalidate(b);
  }

  // swap: S into Y's place, (Y \ I) ∪ (B \ S) into B's region
  const std::vector<ItemId> Bitems = blocks_[b].items;
  std::vector<ItemId> S, BS;
  for (std::size_t q = 0; q < Bitems.size(); ++q) (*mask >> q & 1 ? S : BS).push_back(Bitems[q]);
  Tick cursor = pos_.at(Y.front());
  for (ItemId q : S) {
    move(q, cursor, res);
    cursor += size_.at(q);
  }
  cursor = blocks_[b].start;
  std::vector<ItemId> into_b = BS;
  for (ItemId q : Y)
    if (q != id) into_b.push_back(q);
  for (ItemId q : into_b) {
    move(q, cursor, res);
    cursor += size_.at(q);
  }
  if (cursor > blocks_[b].end) throw AssertionFailure("rsum: swap overflows the block region");

  auto& gxv = group(gx);
  std::erase_if(gxv, [&](ItemId q) { return std::find(Y.begin(), Y.end(), q) != Y.end(); });
  for (ItemId q : S) {
    gxv.push_back(q);
    grp_[q] = gx;
  }
  blocks_[b].items = into_b;
  for (ItemId q : into_b) grp_[q] = b;
  present_ -= size_.at(id);
  size_.erase(id);
  pos_.erase(id);
  grp_.erase(id);
  sort_group(gx);
  sort_group(b);
  invalidate(b);
  ++swaps_;

  push_from(b, res);
  fix_buffer(res);
  return finish();
}

std::optional<std::string> RsumAllocator::self_check() const {
  std::size_t count = 0, valid = 0;
  auto check_group = [&](const std::vector<ItemId>& v, int g, Tick lo, Tick hi) -> std::optional<std::string> {
    Tick prev = lo;
    for (ItemId id : v) {
      if (grp_.at(id) != g) return "rsum: group tag mismatch for item " + std::to_string(id);
      const Tick p = pos_.at(id);
      if (p < prev) return "rsum: group not ordered or overlapping";
      prev = p + size_.at(id);
      if (prev > hi) return "rsum: item outside its region";
      ++count;
    }
    return std::nullopt;
  };
  if (auto e = check_group(head_, kHead, 0, head_end_)) return e;
  Tick at = head_end_;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& B = blocks_[b];
    if (B.start != at) return "rsum: blocks do not tile the main body";
    at = B.end;
    if (auto e = check_group(B.items, static_cast<int>(b), B.start, B.end)) return e;
    if (B.valid) {
      ++valid;
      Tick mass = 0;
      for (ItemId id : B.items) mass += size_.at(id);
      if (static_cast<int>(B.items.size()) != m_ || mass != B.end - B.start) return "rsum: valid block was modified";
    }
  }
  if (valid != valid_count_) return "rsum: valid block count out of sync";
  if (!trash_.empty()) {
    if (tc_start_ < main_end()) return "rsum: trash can overlaps the main body";
    if (pos_.at(trash_.front()) != tc_start_) return "rsum: trash can start not flush";
    if (auto e = check_group(trash_, kTrash, tc_start_, cfg_.memory())) return e;
    if (2 * buffer_gap() > cfg_.epsilon_ticks) return "rsum: buffer above eps/2";
  }
  if (count != size_.size()) return "rsum: item missing from every group";
  return std::nullopt;
}

AllocStats RsumAllocator::stats() const {
  AllocStats st;
  st.rebuilds = rebuilds_;
  st.max_waste = max_gap_;
  st.extra["probes"] = static_cast<double>(probes_);
  st.extra["deletes"] = static_cast<double>(deletes_);
  st.extra["invalidations"] = static_cast<double>(invalidations_);
  st.extra["swaps"] = static_cast<double>(swaps_);
  st.extra["stashes"] = static_cast<double>(stashes_);
  st.extra["short_y"] = static_cast<double>(short_y_);
  st.extra["purity_violations"] = static_cast<double>(purity_violations_);
  st.extra["probes_per_delete"] = deletes_ ? static_cast<double>(probes_) / deletes_ : 0.0;
  return st;
}

}  // namespace mrlab
