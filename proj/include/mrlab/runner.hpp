#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mrlab/core.hpp"

namespace mrlab {

enum class ValidateMode { Every, Final };

struct StepView {
  std::size_t step;
  const UpdateEvent& event;
  const UpdateResult& result;
  Tick moved_mass;
  const World& world;
};

struct RunOptions {
  ValidateMode validate = ValidateMode::Every;
  bool resizable = true;
  bool self_check = true;
  std::size_t self_check_every = 1;  // run self_check after every n-th step (and at the end)
  std::function<void(const StepView&)> on_step;
};

struct RunOutcome {
  CostLedger ledger;
  bool valid = true;
  std::string failure;
  std::size_t steps = 0;
  Tick max_overshoot = 0;  // max over steps of (max_end - L), in ticks
  std::uint64_t violations = 0;
  std::uint64_t final_hash = 0;  // layout_hash of the last applied state
};

/// Feeds events through an allocator into a fresh World, validating per the
/// options. Stops at the first structural error or allocator assertion.
RunOutcome run_events(Allocator& alloc, const std::vector<UpdateEvent>& events, const TickConfig& cfg,
                      const RunOptions& opts = {});

}  // namespace mrlab
