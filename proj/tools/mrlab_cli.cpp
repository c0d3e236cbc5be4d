// mrlab: run allocator experiments from a JSON config.
//
//   mrlab run          --config c.json [--out-dir d] [--validate every|final] [--seed s]
//   mrlab fuzz         --config c.json ...
//   mrlab bench        --config c.json ...
//   mrlab lowerbound   [--config c.json] ...
//   mrlab verify-lemmas [--seed s] [--trials t] [--out-dir d]
//   mrlab replay       --trace t.jsonl
//
// Exit codes: 0 all checks passed, 1 validity or assertion failure, 2 config error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mrlab/experiment.hpp"

namespace fs = std::filesystem;
using namespace mrlab;

namespace {

struct Common {
  std::string config;
  std::string out_dir = ".";
  std::string validate;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config, "JSON experiment config");
  if (config_required) opt->required();
  sub->add_option("--out-dir", c.out_dir, "output directory");
  sub->add_option("--validate", c.validate, "every | final (overrides the config)")
      ->check(CLI::IsMember({"every", "final"}));
  sub->add_option("--seed", c.seed, "run this single seed instead of the config's list");
}

ExperimentConfig resolve(const Common& c, std::optional<nlohmann::json> fallback = std::nullopt) {
  nlohmann::json j;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw ConfigError("config: cannot open " + c.config);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  } else if (fallback) {
    j = *fallback;
  } else {
    throw ConfigError("--config is required");
  }
  if (c.seed) j["seeds"] = {*c.seed};
  auto cfg = parse_config(j);
  if (c.validate == "every") cfg.validate = ValidateMode::Every;
  if (c.validate == "final") cfg.validate = ValidateMode::Final;
  check_config(cfg);
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

int summarize(const std::vector<CellResult>& results) {
  int bad = 0;
  for (const auto& r : results) {
    std::cout << r.cell.allocator << " k=" << r.cell.k << " seed=" << r.cell.seed << " steps=" << r.steps
              << " mass_ratio=" << r.metrics.mass_ratio << (r.valid ? " ok" : " INVALID: " + r.failure) << '\n';
    if (!r.valid) ++bad;
  }
  return bad == 0 ? 0 : 1;
}

std::string trace_name(const Cell& c) {
  return "trace_" + c.allocator + "_k" + std::to_string(c.k) + "_s" + std::to_string(c.seed) + ".jsonl";
}

int cmd_run(const Common& c) {
  const auto cfg = resolve(c);
  fs::create_directories(c.out_dir);
  std::vector<CellResult> results;
  for (const auto& cell : expand_cells(cfg)) {
    CellOptions opts;
    opts.keep_trace = true;
    results.push_back(run_cell(cfg, cell, opts));
    auto out = open_out(fs::path(c.out_dir) / trace_name(cell));
    write_trace(out, results.back());
    results.back().trace.clear();
  }
  auto csv = open_out(fs::path(c.out_dir) / "results.csv");
  write_csv(csv, results);
  return summarize(results);
}

int cmd_fuzz(const Common& c) {
  auto cfg = resolve(c);
  if (c.validate.empty()) cfg.validate = ValidateMode::Every;
  fs::create_directories(c.out_dir);
  const auto results = run_cells_parallel(cfg, expand_cells(cfg));
  auto csv = open_out(fs::path(c.out_dir) / "results.csv");
  write_csv(csv, results);
  return summarize(results);
}

int cmd_bench(const Common& c) {
  const auto cfg = resolve(c);
  fs::create_directories(c.out_dir);
  const auto results = run_cells_parallel(cfg, expand_cells(cfg));
  auto csv = open_out(fs::path(c.out_dir) / "results.csv");
  write_csv(csv, results);
  const auto series = scaling_points(results);
  auto fits = open_out(fs::path(c.out_dir) / "fit.csv");
  fits << "allocator,slope,intercept,r2\n";
  for (const auto& [name, pts] : series) {
    if (pts.size() < 3) {
      std::cout << name << ": fewer than 3 eps values, no fit\n";
      continue;
    }
    const auto f = fit_cost_exponent(pts);
    fits << name << ',' << f.slope << ',' << f.intercept << ',' << f.r2 << '\n';
    std::cout << name << ": slope " << f.slope << " (r2 " << f.r2 << ")\n";
  }
  auto svg = open_out(fs::path(c.out_dir) / "cost.svg");
  write_svg(svg, series);
  return summarize(results);
}

int cmd_lowerbound(const Common& c) {
  const nlohmann::json fallback{{"allocators", {"folklore", "geo", "combined", "rsum"}},
                                {"eps_log4", {4, 5}},
                                {"seeds", {1}},
                                {"workload", {{"kind", "lower_bound"}}}};
  auto j_cfg = resolve(c, fallback);
  j_cfg.workload.kind = WorkloadKind::LowerBound;
  check_config(j_cfg);
  fs::create_directories(c.out_dir);
  const auto results = run_cells_parallel(j_cfg, expand_cells(j_cfg));
  auto csv = open_out(fs::path(c.out_dir) / "results.csv");
  write_csv(csv, results);
  int rc = summarize(results);
  for (const auto& r : results) {
    const double floor = 0.05 * std::log2(1.0 / r.epsilon);
    if (r.metrics.mass_ratio < floor) {
      std::cout << r.cell.allocator << " k=" << r.cell.k << ": mass_ratio " << r.metrics.mass_ratio
                << " below 0.05*log2(1/eps) = " << floor << '\n';
      rc = 1;
    }
  }
  return rc;
}

int cmd_lemmas(const Common& c, std::uint64_t trials) {
  LemmaOptions o;
  o.seed = c.seed.value_or(1);
  o.trials = trials;
  const auto checks = verify_lemmas(o);
  fs::create_directories(c.out_dir);
  auto csv = open_out(fs::path(c.out_dir) / "lemmas.csv");
  write_lemma_csv(csv, checks);
  int rc = 0;
  for (const auto& k : checks) {
    std::cout << (k.pass ? "PASS " : "FAIL ") << k.name << " [" << k.params << "] value=" << k.value
              << " bound=" << k.bound << '\n';
    if (!k.pass) rc = 1;
  }
  return rc;
}

int cmd_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace " + path);
  const auto r = replay_trace(in);
  std::cout << "steps=" << r.steps << " hash=" << r.hash << " recorded=" << r.recorded_hash << '\n';
  if (!r.ok) std::cout << "replay failed: " << r.failure << '\n';
  return r.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memory reallocation experiments"};
  app.require_subcommand(1);
  Common run_c, fuzz_c, bench_c, lb_c, lemma_c;
  auto* run = app.add_subcommand("run", "run every cell and write results plus per-cell traces");
  add_common(run, run_c, true);
  auto* fuzz = app.add_subcommand("fuzz", "validity fuzz, validating after every step");
  add_common(fuzz, fuzz_c, true);
  auto* bench = app.add_subcommand("bench", "eps sweep with a log-log slope fit per allocator");
  add_common(bench, bench_c, true);
  auto* lb = app.add_subcommand("lowerbound", "lower-bound stream against each allocator");
  add_common(lb, lb_c, false);
  auto* lemmas = app.add_subcommand("verify-lemmas", "Monte-Carlo and exact lemma checks");
  std::uint64_t trials = 10000;
  lemmas->add_option("--out-dir", lemma_c.out_dir, "output directory");
  lemmas->add_option("--seed", lemma_c.seed, "base seed");
  lemmas->add_option("--trials", trials, "trials per Monte-Carlo estimate");
  auto* replay = app.add_subcommand("replay", "replay a trace and compare its final layout hash");
  std::string trace;
  replay->add_option("--trace", trace, "trace file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (*run) return cmd_run(run_c);
    if (*fuzz) return cmd_fuzz(fuzz_c);
    if (*bench) return cmd_bench(bench_c);
    if (*lb) return cmd_lowerbound(lb_c);
    if (*lemmas) return cmd_lemmas(lemma_c, trials);
    if (*replay) return cmd_replay(trace);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
