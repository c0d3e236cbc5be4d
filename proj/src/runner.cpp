#include "mrlab/runner.hpp"

#include <algorithm>

namespace mrlab {

RunOutcome run_events(Allocator& alloc, const std::vector<UpdateEvent>& events, const TickConfig& cfg,
                      const RunOptions& opts) {
  RunOutcome out;
  World world(cfg);
  auto fail = [&](std::size_t step, const std::string& why) {
    out.valid = false;
    ++out.violations;
    if (out.failure.empty()) out.failure = "step " + std::to_string(step) + ": " + why;
  };
  for (std::size_t step = 0; step < events.size(); ++step) {
    const UpdateEvent& ev = events[step];
    Tick size = ev.size;
    if (ev.kind == EventKind::Delete) {
      auto it = world.items().find(ev.id);
      if (it == world.items().end()) {
        fail(step, "delete of absent item");
        break;
      }
      size = it->second.true_size;
    }
    UpdateResult res;
    Tick moved = 0;
    try {
      res = alloc.handle(ev);
      moved = world.apply(ev, res);
    } catch (const std::exception& e) {
      fail(step, e.what());
      break;
    }
    out.ledger.add(size, moved);
    out.steps = step + 1;
    out.max_overshoot = std::max(out.max_overshoot, world.max_end() - world.present_mass());
    if (opts.validate == ValidateMode::Every) {
      if (opts.resizable && !world.within_window()) {
        fail(step, "resizable window violated (max_end " + std::to_string(world.max_end()) + ", L " +
                       std::to_string(world.present_mass()) + ")");
        break;
      }
      if (opts.self_check && opts.self_check_every > 0 && (step + 1) % opts.self_check_every == 0) {
        if (auto err = alloc.self_check()) {
          fail(step, *err);
          break;
        }
      }
    }
    if (opts.on_step) opts.on_step(StepView{step, ev, res, moved, world});
  }
  out.final_hash = layout_hash(world.layout(), world.items());
  if (out.valid) {
    auto rep = validate_layout(world.layout(), world.items(), cfg, opts.resizable);
    if (!rep.ok()) fail(out.steps, rep.describe());
    if (auto err = alloc.self_check()) fail(out.steps, *err);
  }
  return out;
}

}  // namespace mrlab
