#pragma once

#include <map>

#include "mrlab/core.hpp"

namespace mrlab {

// Window compaction on insert, free deletes with lazy suffix compaction.
class FolkloreAllocator final : public Allocator {
 public:
  explicit FolkloreAllocator(TickConfig cfg);

  std::string name() const override { return "folklore"; }
  UpdateResult insert(ItemId id, Tick size) override;
  UpdateResult erase(ItemId id) override;
  AllocStats stats() const override;

  // window width ⌈2k/ε⌉ in ticks
  Tick window_for(Tick k) const;
  Tick offset_of(ItemId id) const { return pos_.at(id); }

 private:
  void move(ItemId id, Tick to, std::vector<MoveRecord>& out);
  UpdateResult compact_all_then_append(ItemId id, Tick size);

  TickConfig cfg_;
  std::map<Tick, ItemId> order_;  // offset -> id
  std::unordered_map<ItemId, Tick> pos_;
  std::unordered_map<ItemId, Tick> size_;
  Tick present_ = 0;
  std::uint64_t fallbacks_ = 0;
  std::uint64_t lazy_compactions_ = 0;
};

}  // namespace mrlab
