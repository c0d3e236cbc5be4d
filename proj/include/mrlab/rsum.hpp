#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "mrlab/core.hpp"

namespace mrlab {

/// Some subset of `sizes` with sum in [lo, hi], as a bitmask over indices, or
/// nullopt if none exists. Meet-in-the-middle; among all qualifying subsets the
/// numerically smallest mask is returned. At most 64 sizes.
std::optional<std::uint64_t> subset_sum_in_range(const std::vector<Tick>& sizes, Tick lo, Tick hi);

/// Index range [first, last) of a contiguous run around `at` whose total lands
/// in [lo, hi]: grows right, then left. Returns the whole list if it cannot
/// reach lo.
std::pair<std::size_t, std::size_t> grow_window(const std::vector<Tick>& sizes, std::size_t at, Tick lo, Tick hi);

/// Allocator for δ-random-item sequences (sizes in [δ, 2δ]). The used prefix
/// is main-body | buffer | trash can. The main body holds a blockless head
/// group followed by blocks of m items; deletes are repaired by swapping in a
/// subset of the rightmost valid block and pushing that block (and everything
/// right of it) into the trash can.
class RsumAllocator final : public Allocator {
 public:
  RsumAllocator(TickConfig cfg, Tick delta, std::uint64_t seed);

  std::string name() const override { return "rsum"; }
  UpdateResult insert(ItemId id, Tick size) override;
  UpdateResult erase(ItemId id) override;
  std::optional<std::string> self_check() const override;
  AllocStats stats() const override;

  int block_items() const { return m_; }
  Tick gap_bound() const { return g_; }
  std::int64_t threshold() const { return r_; }
  std::pair<std::int64_t, std::int64_t> threshold_range() const { return {r_lo_, r_hi_}; }
  bool stash_mode() const { return stash_mode_; }
  Tick window_center() const { return 3 * m_ * delta_ / 4; }

  std::size_t block_count() const { return blocks_.size(); }
  std::size_t valid_blocks() const { return valid_count_; }
  bool block_valid(std::size_t b) const { return blocks_.at(b).valid; }
  const std::vector<ItemId>& block_members(std::size_t b) const { return blocks_.at(b).items; }
  const std::vector<ItemId>& head_members() const { return head_; }
  std::vector<ItemId> trash_members() const;
  Tick buffer_gap() const;
  Tick main_end() const;
  Tick trash_start() const { return tc_start_; }

  std::uint64_t probes() const { return probes_; }
  std::uint64_t deletes() const { return deletes_; }
  std::uint64_t rebuild_count() const { return rebuilds_; }
  std::uint64_t invalidations() const { return invalidations_; }
  /// Probes and invalidations during the most recent delete.
  std::uint64_t last_probes() const { return last_probes_; }
  std::uint64_t last_invalidations() const { return last_invalidations_; }
  bool last_rebuilt() const { return last_rebuilt_; }
  std::uint64_t last_stash_cycles() const { return last_stash_; }
  /// Size reads of valid-block items outside their own compatibility probe.
  std::uint64_t purity_violations() const { return purity_violations_; }

  /// Forces a rebuild threshold (test hook); takes effect immediately.
  void set_threshold(std::int64_t r) { r_ = r; }

 private:
  static constexpr int kHead = -2;
  static constexpr int kTrash = -1;

  struct Block {
    Tick start = 0, end = 0;  // region
    std::vector<ItemId> items;  // by position
    bool valid = true;
  };

  Tick read(ItemId id);  // size read for a decision, purity-tracked
  Tick raw(ItemId id) const { return size_.at(id); }
  std::int64_t sample_r();
  void move(ItemId id, Tick to, UpdateResult& res);
  void invalidate(int b);
  bool below_threshold() const { return static_cast<std::int64_t>(valid_count_) < r_; }
  int final_valid() const;
  std::vector<ItemId>& group(int g);
  void sort_group(int g);
  void rebuild(std::optional<ItemId> dropping, UpdateResult& res);
  std::optional<std::uint64_t> probe(int b, Tick lo, Tick hi);
  void push_from(int b, UpdateResult& res);
  void fix_buffer(UpdateResult& res);
  bool stash_cycle(UpdateResult& res);
  void detach(ItemId id);
  Tick trash_end() const;

  TickConfig cfg_;
  Tick delta_;
  int m_ = 0;
  Tick g_ = 0;
  std::int64_t r_lo_ = 1, r_hi_ = 1;
  std::int64_t r_ = 1;
  bool stash_mode_ = false;
  std::mt19937_64 rng_;

  std::unordered_map<ItemId, Tick> size_;
  std::unordered_map<ItemId, Tick> pos_;
  std::unordered_map<ItemId, int> grp_;
  std::vector<ItemId> head_;
  std::vector<Block> blocks_;
  std::size_t valid_count_ = 0;
  std::vector<ItemId> trash_;  // by position
  Tick present_ = 0;
  Tick head_end_ = 0;
  Tick tc_start_ = 0;
  int probing_ = -1000;

  std::uint64_t probes_ = 0, deletes_ = 0, rebuilds_ = 0, invalidations_ = 0, swaps_ = 0, stashes_ = 0;
  std::uint64_t short_y_ = 0, purity_violations_ = 0;
  std::uint64_t last_probes_ = 0, last_invalidations_ = 0, last_stash_ = 0;
  bool last_rebuilt_ = false;
  Tick max_gap_ = 0;
};

}  // namespace mrlab
