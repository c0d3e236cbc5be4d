#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mrlab {

/// Offsets and sizes are integer ticks; memory [0,1] is 2^resolution_log2 ticks.
using Tick = std::int64_t;
using ItemId = std::uint64_t;
using Wide = __int128;

/// Thrown for malformed inputs (unknown ids, overlapping post-states).
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when an allocator receives an item outside its size regime.
struct RegimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when an allocator's internal consistency check fires.
struct AssertionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Exact dyadic memory model.
struct TickConfig {
  int resolution_log2 = 40;
  Tick epsilon_ticks = 0;

  Tick memory() const { return Tick{1} << resolution_log2; }
  double epsilon() const;
  /// log_4(1/ε) when ε is a power of 4, otherwise nullopt.
  std::optional<int> eps_log4() const;
  /// Ticks of 2^-e of memory; requires 0 <= e <= resolution_log2.
  Tick pow2_frac(int e) const;
  /// Nearest tick count of a real fraction of memory.
  Tick from_fraction(long double x) const;
  long double to_fraction(Tick t) const;

  /// Throws std::invalid_argument unless 30 <= resolution_log2 <= 62 and
  /// 0 < epsilon_ticks <= memory().
  void check() const;

  /// ε = 4^-k at the given resolution.
  static TickConfig power_of_four(int k, int resolution_log2 = 40);
};

struct Item {
  ItemId id = 0;
  Tick true_size = 0;
  Tick logical_size = 0;
};

using ItemTable = std::unordered_map<ItemId, Item>;

struct MoveRecord {
  ItemId id = 0;
  Tick from = 0;
  Tick to = 0;
  bool operator==(const MoveRecord&) const = default;
};

/// Injective placement of item ids at offsets, with an offset-ordered index.
class Layout {
 public:
  bool contains(ItemId id) const { return pos_.count(id) != 0; }
  Tick offset(ItemId id) const;
  std::size_t size() const { return pos_.size(); }
  bool empty() const { return pos_.empty(); }

  void place(ItemId id, Tick at);
  void erase(ItemId id);
  void clear();

  const std::unordered_map<ItemId, Tick>& placements() const { return pos_; }
  const std::set<std::pair<Tick, ItemId>>& ordered() const { return order_; }

  bool operator==(const Layout& o) const { return pos_ == o.pos_; }

 private:
  std::unordered_map<ItemId, Tick> pos_;
  std::set<std::pair<Tick, ItemId>> order_;
};

struct ValidityReport {
  std::vector<std::pair<ItemId, ItemId>> overlaps;
  std::vector<ItemId> out_of_bounds;
  bool window_violation = false;
  Tick max_end = 0;
  Tick window_limit = 0;

  bool ok() const { return overlaps.empty() && out_of_bounds.empty() && !window_violation; }
  std::string describe() const;
};

/// Full check of a layout. Intervals use logical sizes; the resizable window
/// is [0, L + ε] with L the sum of true sizes of placed items.
/// Throws StructuralError if a placed id is missing from the item table.
ValidityReport validate_layout(const Layout& layout, const ItemTable& items, const TickConfig& cfg,
                               bool resizable);

/// Applies moves atomically. Throws StructuralError (layout unchanged) on an
/// unknown id or if a moved item would overlap another item.
void apply_moves(Layout& layout, const ItemTable& items, const std::vector<MoveRecord>& moves);

struct CostRecord {
  Tick update_size = 0;
  Tick moved_mass = 0;
};

struct Metrics {
  double ratio_mean = 0;
  double mass_ratio = 0;
};

class CostLedger {
 public:
  void add(Tick update_size, Tick moved_mass);
  const std::vector<CostRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<CostRecord> records_;
};

/// ratio_mean = (1/n) Σ L_i/k_i, mass_ratio = Σ L_i / Σ k_i.
/// Throws std::invalid_argument on an empty ledger.
Metrics amortized_metrics(const CostLedger& ledger);

enum class EventKind { Insert, Delete };

struct UpdateEvent {
  EventKind kind = EventKind::Insert;
  ItemId id = 0;
  Tick size = 0;  // inserts only; deletes carry the item's size for convenience

  static UpdateEvent insert(ItemId id, Tick size) { return {EventKind::Insert, id, size}; }
  static UpdateEvent erase(ItemId id, Tick size = 0) { return {EventKind::Delete, id, size}; }
  bool operator==(const UpdateEvent&) const = default;
};

struct LogicalResize {
  ItemId id = 0;
  Tick logical = 0;
};

/// What an allocator does in response to one update.
struct UpdateResult {
  std::vector<MoveRecord> moves;       // relocations of items other than the updated one
  Tick placed_at = -1;                 // offset of an inserted item
  std::vector<LogicalResize> resizes;  // logical size changes, applied before moves
};

struct AllocStats {
  std::uint64_t rebuilds = 0;
  Tick max_waste = 0;
  std::map<std::string, double> extra;
};

/// Uniform allocator contract.
class Allocator {
 public:
  virtual ~Allocator() = default;
  virtual std::string name() const = 0;
  virtual UpdateResult insert(ItemId id, Tick size) = 0;
  virtual UpdateResult erase(ItemId id) = 0;
  /// Internal invariant check; returns a description of the first failure.
  virtual std::optional<std::string> self_check() const { return std::nullopt; }
  virtual AllocStats stats() const { return {}; }

  UpdateResult handle(const UpdateEvent& ev) {
    return ev.kind == EventKind::Insert ? insert(ev.id, ev.size) : erase(ev.id);
  }
};

/// Canonical state owned by the runner: item table, layout, present mass.
/// All mutation goes through apply().
class World {
 public:
  explicit World(TickConfig cfg) : cfg_(cfg) {}

  /// Applies an allocator's response; returns the moved mass (true sizes).
  /// Throws StructuralError on an invalid post-state.
  Tick apply(const UpdateEvent& ev, const UpdateResult& res);
  /// Applies moves that are not tied to an insert or delete.
  Tick apply_moves_only(const std::vector<MoveRecord>& moves);

  /// Cheap window check on the current state.
  bool within_window() const { return max_end() <= present_mass_ + cfg_.epsilon_ticks; }
  Tick max_end() const;

  const ItemTable& items() const { return items_; }
  const Layout& layout() const { return layout_; }
  Tick present_mass() const { return present_mass_; }
  const TickConfig& config() const { return cfg_; }

 private:
  void insert_checked(ItemId id);
  TickConfig cfg_;
  ItemTable items_;
  Layout layout_;
  Tick present_mass_ = 0;
};

/// FNV-1a over (offset, id, logical size) in offset order.
std::uint64_t layout_hash(const Layout& layout, const ItemTable& items);

/// Collects moves for items whose offset differs between two snapshots.
std::vector<MoveRecord> diff_offsets(const std::unordered_map<ItemId, Tick>& before,
                                     const std::unordered_map<ItemId, Tick>& after);

/// Merges repeated moves of one item into a single net move, drops no-ops, and
/// keeps the last logical resize per item.
void coalesce(UpdateResult& res);

/// ceil(a*b/c) and floor(a*b/c) without overflow, for nonnegative operands.
Tick mul_div_ceil(Tick a, Tick b, Tick c);
Tick mul_div_floor(Tick a, Tick b, Tick c);

}  // namespace mrlab
