#pragma once

#include <vector>

#include "mrlab/core.hpp"

namespace mrlab {

// Covering-set allocator for sizes in [ε, 2ε).
class SimpleAllocator final : public Allocator {
 public:
  explicit SimpleAllocator(TickConfig cfg);

  std::string name() const override { return "simple"; }
  UpdateResult insert(ItemId id, Tick size) override;
  UpdateResult erase(ItemId id) override;
  std::optional<std::string> self_check() const override;
  AllocStats stats() const override;

  int class_count() const { return static_cast<int>(bounds_.size()) - 1; }
  int period() const { return period_; }
  /// 1-based size class; throws RegimeError outside [ε, 2ε).
  int classify(Tick size) const;
  /// Lower boundary of class i (1-based); bound(class_count()+1) is the top.
  Tick class_lo(int i) const { return bounds_[i - 1]; }

  // diagnostics
  std::vector<ItemId> sequence() const { return seq_; }
  std::size_t covering_start() const { return cover_; }
  Tick logical_size(ItemId id) const { return info_.at(id).logical; }
  Tick waste() const;
  /// Runs the rebuild now (exposed for tests).
  UpdateResult rebuild_now();

 private:
  struct Info {
    Tick size = 0;
    Tick logical = 0;
    int cls = 0;
  };
  void maybe_rebuild(UpdateResult& res);
  void rebuild(UpdateResult& res);
  // recompute offsets from index `from`, appending moves (except for `skip`)
  void relayout(std::size_t from, UpdateResult& res, ItemId skip);

  TickConfig cfg_;
  std::vector<Tick> bounds_;  // bounds_[i-1] = ε + (i-1)ε^(4/3)
  int period_ = 1;
  std::vector<ItemId> seq_;   // memory order
  std::size_t cover_ = 0;     // seq_[cover_..] is the covering set
  std::unordered_map<ItemId, Info> info_;
  std::unordered_map<ItemId, Tick> pos_;
  std::uint64_t updates_ = 0;
  std::uint64_t rebuilds_ = 0;
  std::uint64_t swaps_ = 0;
  Tick max_waste_ = 0;
};

}  // namespace mrlab
