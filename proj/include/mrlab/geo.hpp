#pragma once

#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "mrlab/core.hpp"

namespace mrlab {

/// Geometric size classes over [ε⁵, ε^(1/2)/100) with nested covering levels,
/// randomized rebuild thresholds and waste recovery. Larger items are "huge"
/// and live in a compacted prefix of memory.
///
/// "Smallest" always means by rank key (logical size, tie id). A swapped-in
/// item takes over the deleted item's whole key, so it ranks where the deleted
/// item did until the next waste recovery resets keys to (true size, own id).
///
/// Memory layout: huge items (insertion order) followed by the non-huge
/// sequence, which is contiguous under logical sizes and ordered by
/// nondecreasing level label. Level j is the suffix with label >= j.
class GeoAllocator final : public Allocator {
 public:
  enum Dir { Ins = 0, Del = 1 };

  /// Requires ε = 4^-k with ε⁵ at least one tick.
  GeoAllocator(TickConfig cfg, std::uint64_t seed);

  std::string name() const override { return "geo"; }
  UpdateResult insert(ItemId id, Tick size) override;
  UpdateResult erase(ItemId id) override;
  std::optional<std::string> self_check() const override;
  AllocStats stats() const override;

  int levels() const { return ell_; }
  int class_count() const { return classes_; }
  /// Class index in [1, C]; throws RegimeError below ε⁵ or at/above the huge threshold.
  int classify(Tick size) const;
  bool is_huge(Tick size) const { return size >= huge_; }
  Tick huge_threshold() const { return huge_; }
  /// Frozen boundary b_i in ticks, i in [0, C].
  Tick boundary(int i) const { return bound_[i]; }
  std::int64_t capacity(int i, int j) const;
  int deepest_level(int i) const { return jstar_[i]; }
  /// m_j in ticks.
  Tick mass_limit(int j) const;

  // diagnostics
  int label(ItemId id) const { return info_.at(id).label; }
  Tick logical_size(ItemId id) const { return info_.at(id).logical; }
  /// Tie-break half of the rank key.
  ItemId rank_tie(ItemId id) const { return info_.at(id).tie; }
  std::size_t level_count(int i, int j) const;
  /// Items of class i labelled exactly j, from incremental counts.
  std::int64_t label_count(int i, int j) const { return at_label_[i][j]; }
  /// Checks the level-size bound (at most 2c_{i,j} class-i items at level j
  /// or deeper) for every class whose labels changed since the last call.
  std::optional<std::string> level_check() const;
  std::int64_t counter(Dir d, int i, int j) const { return t_[d][i][j]; }
  std::int64_t threshold(Dir d, int i, int j) const { return r_[d][i][j]; }
  const std::vector<ItemId>& sequence() const { return seq_; }
  Tick waste_counter() const { return waste_; }
  Tick waste_threshold() const { return T_; }
  /// Σ (logical - true) over non-huge items.
  Tick inflation_gap() const;
  /// Smallest level rebuilt by the last update, or 0 if none.
  int last_rebuild_level() const { return last_j0_; }
  bool last_recovered() const { return last_recovered_; }

  // test hooks
  void set_threshold(Dir d, int i, int j, std::int64_t r) { r_[d][i][j] = r; }
  void set_waste(Tick w, Tick t) {
    waste_ = w;
    T_ = t;
  }

 private:
  struct Info {
    Tick size = 0;
    Tick logical = 0;
    int cls = 0;  // 0 for huge items
    int label = 0;
    ItemId tie = 0;
  };
  using RankKey = std::tuple<Tick, ItemId, ItemId>;  // (logical, tie, id)
  static RankKey key_of(ItemId id, const Info& inf) { return {inf.logical, inf.tie, id}; }

  std::int64_t sample_threshold(int i, int j);
  Tick sample_waste_threshold();
  Tick region_start() const { return huge_mass_; }
  void relayout(std::size_t from, UpdateResult& res);
  void relayout_huge(UpdateResult& res);
  void count_and_rebuild(Dir d, int cls, UpdateResult& res);
  void rebuild(int j0, UpdateResult& res);
  void recover(UpdateResult& res);
  std::size_t index_of(ItemId id) const;
  void relabel(int cls, int from, int to);  // -1: no label

  TickConfig cfg_;
  int k_ = 0;
  int ell_ = 0;
  int classes_ = 0;
  Tick huge_ = 0;
  std::vector<Tick> bound_;                    // b_0..b_C
  std::vector<std::vector<std::int64_t>> c_;  // c_[i][j], j in [0, ell+1]
  std::vector<int> jstar_;
  std::vector<std::vector<std::int64_t>> at_label_;  // [i][label]
  mutable std::vector<int> touched_;
  mutable std::vector<char> touched_flag_;
  std::vector<std::vector<std::int64_t>> r_[2];
  std::vector<std::vector<std::int64_t>> t_[2];
  std::mt19937_64 rng_;

  std::unordered_map<ItemId, Info> info_;
  std::unordered_map<ItemId, Tick> pos_;
  std::vector<ItemId> huge_items_;
  Tick huge_mass_ = 0;
  std::vector<ItemId> seq_;
  std::vector<std::set<RankKey>> by_class_;
  std::set<int> present_classes_;

  Tick waste_ = 0;
  Tick T_ = 0;
  int last_j0_ = 0;
  bool last_recovered_ = false;

  std::uint64_t rebuilds_ = 0;
  std::uint64_t recoveries_ = 0;
  std::uint64_t swaps_ = 0;
  std::uint64_t huge_ops_ = 0;
  Tick max_gap_ = 0;
};

}  // namespace mrlab
