#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "mrlab/core.hpp"
#include "mrlab/geo.hpp"

namespace mrlab {

/// Reference tiny-item allocator over logical memory units of M ticks.
/// Each item gets a power-of-two slab, aligned to its size, placed first-fit.
/// A unit is created on a miss or when slab occupancy exceeds 3/4; the last
/// unit is destroyed when occupancy drops below 1/4 and its items can be
/// re-placed first-fit in the remaining units.
class TinyRef {
 public:
  struct Slot {
    int unit = 0;
    Tick offset = 0;
    bool operator==(const Slot&) const = default;
  };
  struct Relocation {
    ItemId id;
    Slot from, to;
  };
  /// What one operation did, in order: relocations happen before a destroy.
  struct Delta {
    std::optional<Slot> placed;
    std::vector<Relocation> relocations;
    int created = 0;            // number of units appended
    bool destroyed = false;     // last unit removed
    int destroyed_unit = -1;
  };

  explicit TinyRef(Tick unit_size);

  Delta insert(ItemId id, Tick size);
  Delta erase(ItemId id);

  Tick unit_size() const { return M_; }
  int units() const { return static_cast<int>(units_.size()); }
  Slot slot_of(ItemId id) const { return where_.at(id); }
  Tick slab_of(ItemId id) const { return slab_.at(id); }
  /// offset -> id for one unit
  const std::map<Tick, ItemId>& contents(int unit) const { return units_.at(unit); }
  Tick slab_mass() const { return slab_mass_; }

  static Tick slab_for(Tick size);

 private:
  std::optional<Tick> fit(int unit, Tick slab) const;
  std::optional<Slot> first_fit(Tick slab, int unit_limit) const;
  void put(ItemId id, Slot s);

  Tick M_;
  std::vector<std::map<Tick, ItemId>> units_;
  std::unordered_map<ItemId, Slot> where_;
  std::unordered_map<ItemId, Tick> slab_;
  Tick slab_mass_ = 0;
};

/// Relocatable wrapper around TinyRef: units are placed at
/// Δ + ΣB + π(u)·M, with per-update-type buffer usage B_i absorbing external
/// pushes and unit rotations restoring B_i when it drifts.
class FlexAllocator final : public Allocator {
 public:
  enum class Push { Right, Left };

  /// ε = 4^-k; tiny items are at most ε⁴. `base` is the initial Δ.
  FlexAllocator(TickConfig cfg, std::uint64_t seed, Tick base = 0);

  std::string name() const override { return "flex"; }
  UpdateResult insert(ItemId id, Tick size) override;
  UpdateResult erase(ItemId id) override;
  std::optional<std::string> self_check() const override;
  AllocStats stats() const override;

  /// Shifts the region start by x (> ε⁴) and restores the buffer invariant.
  UpdateResult external(Tick x, Push dir);
  /// Rotates r units (positive: physically first to last), charging the
  /// shift of the central start to buffer i.
  UpdateResult rotate(std::int64_t r, int type);

  Tick unit_size() const { return M_; }
  Tick tiny_limit() const { return e4_; }
  int types() const { return C_; }
  int small_types() const { return Csmall_; }
  int type_of(Tick x) const;
  Tick buffer(int i) const { return B_[i]; }
  Tick buffer_total() const { return sumB_; }
  Tick base() const { return delta_; }
  Tick central_start() const { return delta_ + sumB_; }
  /// phys[p] = logical unit in physical slot p
  const std::vector<int>& physical_order() const { return phys_; }
  Tick unit_address(int unit) const;
  Tick region_end() const { return central_start() + static_cast<Tick>(phys_.size()) * M_; }
  const TinyRef& tiny() const { return tiny_; }
  Tick offset_of(ItemId id) const;

  // test hooks
  void set_rebuild_threshold(int i, Push dir, Tick r) { (dir == Push::Right ? R_ : Rl_)[i] = r; }
  Tick pushes(int i, Push dir) const { return (dir == Push::Right ? P_ : Pl_)[i]; }

 private:
  Tick sample_R();
  void apply_delta(const TinyRef::Delta& d, UpdateResult& res);
  void emit_unit_moves(const std::vector<Tick>& before, UpdateResult& res);
  std::vector<Tick> unit_addresses() const;
  void rotate_into(std::int64_t r, int type, UpdateResult& res);
  void restore(int i, UpdateResult& res);

  TickConfig cfg_;
  Tick M_ = 0;
  Tick e4_ = 0;
  int C_ = 0;
  int Csmall_ = 0;
  std::vector<Tick> B_, P_, Pl_, R_, Rl_;  // 1-based by type
  Tick sumB_ = 0;
  Tick delta_ = 0;
  std::vector<int> phys_;
  std::vector<int> pi_;
  TinyRef tiny_;
  std::unordered_map<ItemId, Tick> size_;
  std::mt19937_64 rng_;

  std::uint64_t rotations_ = 0;
  std::uint64_t buffer_rebuilds_ = 0;
  std::uint64_t unit_swaps_ = 0;
};

/// GEO for items above ε⁴ (run with ε/4) followed by a relocatable tiny region
/// starting at L1 + ε/4, where L1 is the present large mass.
class CombinedAllocator final : public Allocator {
 public:
  CombinedAllocator(TickConfig cfg, std::uint64_t seed);

  std::string name() const override { return "combined"; }
  UpdateResult insert(ItemId id, Tick size) override;
  UpdateResult erase(ItemId id) override;
  std::optional<std::string> self_check() const override;
  AllocStats stats() const override;

  bool is_tiny(Tick size) const { return size <= flex_->tiny_limit(); }
  const GeoAllocator& geo() const { return *geo_; }
  const FlexAllocator& flex() const { return *flex_; }
  Tick large_mass() const { return L1_; }

  /// GEO's slack: the largest power of 4 not above ε/2.
  static TickConfig geo_config(const TickConfig& cfg);

 private:
  static void append(UpdateResult& into, const UpdateResult& from);

  TickConfig cfg_;
  std::unique_ptr<GeoAllocator> geo_;
  std::unique_ptr<FlexAllocator> flex_;
  std::unordered_map<ItemId, Tick> size_;
  Tick L1_ = 0;
};

}  // namespace mrlab
