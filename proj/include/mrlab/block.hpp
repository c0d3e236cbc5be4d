#pragma once

#include <map>
#include <set>
#include <utility>
#include <vector>

#include "mrlab/core.hpp"

namespace mrlab {

/// Mem-block geometry for a given ε and γ.
struct BlockParams {
  double gamma = 0;
  double a = 0;  // 2 + γ
  int ell = 0;
  /// M[i-1] = M_i in ticks, strictly decreasing powers of two.
  std::vector<Tick> M;

  Tick tier_size(int i) const { return M.at(static_cast<std::size_t>(i - 1)); }
  /// M_{i-1} / M_i for i >= 2.
  Tick ratio(int i) const { return tier_size(i - 1) / tier_size(i); }
};

/// Smallest ℓ > 1 with γ/4 < 1/(ℓ-1) < γ/2, and M_i the power of two nearest
/// (in log scale) to ε^((ℓ-i+ia)/(ℓ+1)); each later size is pushed down as
/// needed so every ratio is at least 2. Throws std::invalid_argument for γ
/// outside (0, 1/4) or when M_ℓ falls below one tick.
BlockParams block_sizes(const TickConfig& cfg, double gamma);

/// Per-size aligned mem-blocks of ℓ graded sizes, maintained by fracture,
/// merge and place.
class BlockAllocator final : public Allocator {
 public:
  struct Regime {
    Tick lo = 0, hi = 0;
  };

  /// (ε⁵, min(ε^(2+γ), M_ℓ/4)).
  static Regime default_regime(const TickConfig& cfg, double gamma);

  /// Throws std::invalid_argument unless M_ℓ >= 4·hi and 0 < lo <= hi.
  BlockAllocator(TickConfig cfg, double gamma, Regime regime);
  BlockAllocator(TickConfig cfg, double gamma) : BlockAllocator(cfg, gamma, default_regime(cfg, gamma)) {}

  std::string name() const override { return "block"; }
  UpdateResult insert(ItemId id, Tick size) override;
  UpdateResult erase(ItemId id) override;
  std::optional<std::string> self_check() const override;
  AllocStats stats() const override;

  const BlockParams& params() const { return p_; }
  Regime regime() const { return regime_; }
  /// Smallest point of the (1+ε) grid anchored at lo that is >= size.
  Tick discretize(Tick size) const;

  struct WasteReport {
    Tick total_block_mass = 0;
    Tick total_present_mass = 0;
  };
  WasteReport waste_report() const { return {block_mass_, present_}; }

  /// Number of x-mem-blocks of tier i.
  std::size_t count(Tick x, int tier) const;
  /// Start of size x's active block, or -1.
  Tick active_start(Tick x) const;
  std::size_t active_items(Tick x) const;
  /// Blocks per tier over all sizes (index 0 = tier 1).
  std::vector<std::size_t> tier_occupancy() const;
  std::size_t block_total() const { return blocks_.size(); }
  /// Offset of an item.
  Tick offset_of(ItemId id) const { return pos_.at(id); }
  /// Start and tier of the block holding an item.
  std::pair<Tick, int> block_of(ItemId id) const;

  std::uint64_t fractures() const { return fractures_; }
  std::uint64_t merge_passes() const { return merge_passes_; }
  std::uint64_t places() const { return places_; }
  /// Soft "merge-no-upwards-stream" triggers.
  std::uint64_t upwards_stream_triggers() const { return upward_; }
  std::size_t max_place_depth() const { return max_depth_; }
  /// Merge passes whose non-active blocks held fewer than ⌊M_{i-1}/x⌋ items.
  std::uint64_t short_merges() const { return short_merges_; }
  /// Merge sweeps beyond the first within one insert.
  std::uint64_t extra_sweeps() const { return extra_sweeps_; }

  /// Full state listing, attached to assertion failures.
  std::string dump() const;

 private:
  using BlockId = std::uint64_t;

  struct Block {
    int tier = 0;
    Tick x = 0;
    Tick start = -1;  // -1 while unplaced
    std::vector<ItemId> items;  // slot order
  };

  struct SizeState {
    BlockId active = 0;
    bool has_active = false;
    std::vector<std::set<BlockId>> tiers;  // index tier-1
  };

  std::int64_t capacity(Tick x, int tier) const { return p_.tier_size(tier) / x; }
  bool over_hou(std::size_t n, int tier) const;       // n > (3/2) M_{i-1}/M_i
  bool over_merge(std::size_t n, int tier) const;     // n > (5/4) M_{i-1}/M_i
  bool at_least_merge(std::size_t n, int tier) const; // n >= (5/4) M_{i-1}/M_i
  [[noreturn]] void fail(const std::string& tag) const;

  SizeState& state(Tick x);
  BlockId create(int tier, Tick x, std::vector<ItemId> items);
  void destroy(BlockId b);
  void index(BlockId b);
  void unindex(BlockId b);
  void put_item(ItemId id, BlockId b, std::size_t slot, UpdateResult& res);
  std::optional<Tick> find_region(int tier, bool empty_only) const;
  void place(BlockId b, UpdateResult& res, std::size_t depth);
  void move_block(BlockId b, Tick to, UpdateResult& res);
  /// Builds one block of `first_tier` (capped at its capacity), then greedy full
  /// blocks of tiers `from_tier`..ℓ, then a partial tier-ℓ block for leftovers.
  std::vector<BlockId> repack(Tick x, std::vector<ItemId> items, int first_tier, int from_tier);
  void fracture(Tick x, UpdateResult& res);
  void merge(Tick x, int tier, UpdateResult& res);
  void designate(Tick x);

  TickConfig cfg_;
  BlockParams p_;
  Regime regime_;
  long double log_step_ = 0;

  std::map<BlockId, Block> blocks_;
  std::map<Tick, BlockId> by_start_;  // placed blocks
  std::map<Tick, SizeState> sizes_;
  std::unordered_map<ItemId, std::pair<BlockId, std::size_t>> where_;
  std::unordered_map<ItemId, Tick> pos_;
  std::unordered_map<ItemId, Tick> true_;
  BlockId next_block_ = 1;
  Tick block_mass_ = 0;
  Tick present_ = 0;
  Tick peak_waste_ = 0;

  std::uint64_t fractures_ = 0, merge_passes_ = 0, places_ = 0, upward_ = 0, short_merges_ = 0;
  std::uint64_t extra_sweeps_ = 0;
  std::size_t max_depth_ = 0;
};

}  // namespace mrlab
