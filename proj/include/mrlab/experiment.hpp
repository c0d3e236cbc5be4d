#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mrlab/core.hpp"
#include "mrlab/runner.hpp"
#include "mrlab/workload.hpp"

namespace mrlab {

/// Malformed or inconsistent experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// scale·ε^eps_pow as a fraction of memory.
struct SizeBound {
  double scale = 1.0;
  double eps_pow = 1.0;
  Tick ticks(const TickConfig& cfg) const;
};

enum class WorkloadKind { Regime, Fuzz, RandomItem, LowerBound };

struct WorkloadConfig {
  WorkloadKind kind = WorkloadKind::Regime;
  std::size_t updates = 10000;
  SizeBound size_lo{1.0, 1.0};  // fuzz sizes lie in [size_lo, size_hi)
  SizeBound size_hi{2.0, 1.0};
  double target_load = 0.9;
  SizeLaw law = SizeLaw::Uniform;
  double delta_over_eps = 1.0;  // δ for random-item streams and the rsum allocator
};

/// One JSON document:
///
///   {
///     "allocators": ["folklore", "simple"],     // required
///     "eps_log4": [2, 3, 4],                    // required, ε = 4^-k
///     "seeds": [1, 2, 3],                       // required
///     "resolution": 40,                         // optional, log2 ticks per unit memory
///     "gamma": 0.2,
///     "validate": "every" | "final",
///     "self_check": true,
///     "self_check_every": 1,
///     "workload": {
///       "kind": "regime" | "fuzz" | "random_item" | "lower_bound",
///       "updates": 10000,
///       "size_lo": {"scale": 1, "eps_pow": 1},
///       "size_hi": {"scale": 2, "eps_pow": 1},
///       "target_load": 0.9,
///       "law": "uniform" | "log_uniform",
///       "delta_over_eps": 1.0
///     }
///   }
///
/// Unknown keys are rejected. "regime" gives every allocator its own fuzz or
/// random-item stream (see cell_events).
struct ExperimentConfig {
  std::vector<std::string> allocators;
  std::vector<int> eps_log4;
  std::vector<std::uint64_t> seeds;
  std::optional<int> resolution;
  double gamma = 0.2;
  WorkloadConfig workload;
  ValidateMode validate = ValidateMode::Every;
  bool self_check = true;
  std::size_t self_check_every = 1;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// folklore, simple, geo, combined, rsum, block
const std::vector<std::string>& allocator_names();

struct Cell {
  std::string allocator;
  int k = 0;
  std::uint64_t seed = 0;
  bool operator==(const Cell&) const = default;
};

/// Allocator-major, then k, then seed.
std::vector<Cell> expand_cells(const ExperimentConfig& cfg);

/// Configured resolution, or the smallest default (at least 40) that keeps the
/// allocator's smallest size class at one tick or more.
int cell_resolution(const ExperimentConfig& cfg, const Cell& cell);
TickConfig cell_ticks(const ExperimentConfig& cfg, const Cell& cell);
/// δ in ticks: ε^(1/2) on the lower-bound stream, delta_over_eps·ε otherwise.
Tick cell_delta(const ExperimentConfig& cfg, const Cell& cell, const TickConfig& tc);

std::unique_ptr<Allocator> make_allocator(const ExperimentConfig& cfg, const Cell& cell, const TickConfig& tc);

/// The cell's update stream. Regime streams:
///   folklore, simple  uniform [ε, 2ε) fuzz at load 0.9
///   geo               log-uniform [ε⁵, 1) fuzz at load 0.9
///   combined          log-uniform [ε⁴/64, 1/8) fuzz at load 0.85
///   rsum              δ-random-item stream
///   block             uniform fuzz over the default block regime at load 0.9
std::vector<UpdateEvent> cell_events(const ExperimentConfig& cfg, const Cell& cell, const TickConfig& tc);

/// Throws ConfigError if any cell cannot be built (unknown allocator, ε outside
/// an allocator's range, resolution out of bounds).
void check_config(const ExperimentConfig& cfg);

struct TraceStep {
  UpdateEvent event;
  UpdateResult result;
  Tick moved = 0;
};

struct CellResult {
  Cell cell;
  int resolution = 0;
  Tick epsilon_ticks = 0;
  double epsilon = 0;
  double delta = 0;  // fraction of memory; 0 when the allocator has no δ
  std::size_t steps = 0;
  Metrics metrics;
  double max_waste = 0;  // fraction of memory
  std::uint64_t rebuilds = 0;
  bool valid = true;
  std::string failure;
  std::uint64_t violations = 0;
  std::uint64_t final_hash = 0;
  std::map<std::string, double> extra;
  std::vector<TraceStep> trace;
};

struct CellOptions {
  bool keep_trace = false;
  /// Called after every applied step with the cell's allocator.
  std::function<void(const Allocator&, const StepView&)> observer;
};

CellResult run_cell(const ExperimentConfig& cfg, const Cell& cell, const CellOptions& opts = {});

/// Serial reference: cells in order.
std::vector<CellResult> run_cells_serial(const ExperimentConfig& cfg, const std::vector<Cell>& cells);
/// OpenMP over cells; identical results in identical order.
std::vector<CellResult> run_cells_parallel(const ExperimentConfig& cfg, const std::vector<Cell>& cells);

struct Fit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

/// Least squares on (log x, log y). Needs at least 3 positive points and two
/// distinct x values; throws std::invalid_argument otherwise.
Fit fit_cost_exponent(const std::vector<std::pair<double, double>>& points);

/// Per allocator: (ε⁻¹, mass_ratio averaged over seeds), ascending in ε⁻¹.
std::map<std::string, std::vector<std::pair<double, double>>> scaling_points(const std::vector<CellResult>& results);

/// Columns: allocator, epsilon, delta, seed, steps, ratio_mean, mass_ratio, max_waste, rebuild_count.
void write_csv(std::ostream& out, const std::vector<CellResult>& results);
/// Header line, one line per step, summary line.
void write_trace(std::ostream& out, const CellResult& result);
/// Log-log line chart of cost against ε⁻¹, one polyline per allocator.
void write_svg(std::ostream& out, const std::map<std::string, std::vector<std::pair<double, double>>>& series);

struct ReplayResult {
  std::size_t steps = 0;
  std::uint64_t hash = 0;
  std::uint64_t recorded_hash = 0;
  bool ok = false;
  std::string failure;
};

/// Re-applies a trace's recorded results to a fresh World and compares the
/// final layout hash with the recorded one.
ReplayResult replay_trace(std::istream& in);

struct LemmaCheck {
  std::string name;
  std::string params;
  double value = 0;
  double bound = 0;
  bool pass = false;
};

struct LemmaOptions {
  std::uint64_t seed = 1;
  std::uint64_t trials = 10000;
  std::uint64_t subset_trials = 2000;
};

/// Monte-Carlo and exact checks of the hitting, subset and potential lemmas,
/// each with a 3σ margin where statistical.
std::vector<LemmaCheck> verify_lemmas(const LemmaOptions& opts);
void write_lemma_csv(std::ostream& out, const std::vector<LemmaCheck>& checks);

}  // namespace mrlab
