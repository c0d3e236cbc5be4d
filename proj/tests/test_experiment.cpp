#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mrlab/experiment.hpp"

using namespace mrlab;

namespace {

ExperimentConfig small(std::vector<std::string> allocs, std::vector<int> ks, std::size_t updates) {
  ExperimentConfig c;
  c.allocators = std::move(allocs);
  c.eps_log4 = std::move(ks);
  c.seeds = {1, 2};
  c.workload.updates = updates;
  return c;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("fit_cost_exponent recovers power laws") {
  std::vector<std::pair<double, double>> lin, root;
  for (double x : {4.0, 16.0, 64.0, 256.0}) {
    lin.push_back({x, 3 * x});
    root.push_back({x, std::sqrt(x)});
  }
  const auto a = fit_cost_exponent(lin);
  CHECK(a.slope == doctest::Approx(1.0));
  CHECK(a.intercept == doctest::Approx(std::log(3.0)));
  CHECK(a.r2 == doctest::Approx(1.0));
  CHECK(fit_cost_exponent(root).slope == doctest::Approx(0.5));

  CHECK_THROWS_AS(fit_cost_exponent({{1, 1}, {2, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_cost_exponent({{1, 1}, {2, 0}, {3, 3}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_cost_exponent({{2, 1}, {2, 2}, {2, 3}}), std::invalid_argument);
}

TEST_CASE("csv and svg writers") {
  std::ostringstream empty;
  write_csv(empty, {});
  CHECK(empty.str() == "allocator,epsilon,delta,seed,steps,ratio_mean,mass_ratio,max_waste,rebuild_count\n");

  CellResult r;
  r.cell = {"folklore", 2, 9};
  r.epsilon = 1.0 / 16;
  r.steps = 12;
  r.metrics.ratio_mean = 1.5;
  r.metrics.mass_ratio = 0.25;
  r.max_waste = 0.0;
  r.rebuilds = 3;
  std::ostringstream one;
  write_csv(one, {r});
  const auto rows = read_csv(one.str());
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[1].size() == 9);
  CHECK(rows[1][0] == "folklore");
  CHECK(std::stod(rows[1][1]) == 0.0625);
  CHECK(rows[1][3] == "9");
  CHECK(rows[1][4] == "12");
  CHECK(std::stod(rows[1][5]) == 1.5);
  CHECK(std::stod(rows[1][6]) == 0.25);
  CHECK(rows[1][8] == "3");

  std::ostringstream svg;
  write_svg(svg, {{"a", {{4, 1}, {16, 2}}}, {"b", {{4, 3}, {16, 5}}}});
  CHECK(count(svg.str(), "<polyline") == 2);
  CHECK(svg.str().find("id=\"b\"") != std::string::npos);
}

TEST_CASE("config parsing") {
  const auto c = parse_config_text(
      R"({"allocators":["geo"],"eps_log4":[2,3],"seeds":[5],"validate":"final",
          "workload":{"kind":"fuzz","updates":7,"law":"log_uniform","size_lo":{"scale":1,"eps_pow":5}}})");
  CHECK(c.allocators == std::vector<std::string>{"geo"});
  CHECK(c.validate == ValidateMode::Final);
  CHECK(c.workload.kind == WorkloadKind::Fuzz);
  CHECK(c.workload.updates == 7);
  CHECK(c.workload.law == SizeLaw::LogUniform);
  CHECK(c.workload.size_lo.eps_pow == 5);
  CHECK(parse_config(to_json(c)).workload.size_lo.eps_pow == 5);
  CHECK(expand_cells(c).size() == 2);

  CHECK_THROWS_AS(parse_config_text(R"({"allocators":["geo"],"eps_log4":[2]})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"allocators":["geo"],"eps_log4":[2],"seeds":[1],"colour":1})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"allocators":["geo"],"eps_log4":[2],"seeds":[1],"validate":"often"})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"allocators":["nope"],"eps_log4":[2],"seeds":[1]})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
}

TEST_CASE("combined at eps = 4^-6 has no representable resolution") {
  ExperimentConfig c = small({"combined"}, {6}, 10);
  CHECK_THROWS_AS(check_config(c), ConfigError);
  c.eps_log4 = {5};
  CHECK_NOTHROW(check_config(c));
}

TEST_CASE("folklore on the lower-bound stream") {
  ExperimentConfig c = small({"folklore"}, {4}, 0);
  c.workload.kind = WorkloadKind::LowerBound;
  CellOptions o;
  o.keep_trace = true;
  const auto r = run_cell(c, {"folklore", 4, 1}, o);
  CHECK(r.valid);
  CHECK(r.steps > 0);
  CHECK(r.trace.size() == r.steps);
  CHECK(r.metrics.mass_ratio >= 0.05 * std::log2(1.0 / r.epsilon));
}

TEST_CASE("simple fuzz has no violations") {
  ExperimentConfig c = small({"simple"}, {2}, 10000);
  c.workload.kind = WorkloadKind::Fuzz;
  const auto r = run_cell(c, {"simple", 2, 1});
  CHECK(r.valid);
  CHECK(r.violations == 0);
  CHECK(r.steps == 10000);
}

TEST_CASE("trace replay reproduces the final layout") {
  for (const auto& name : allocator_names()) {
    CAPTURE(name);
    ExperimentConfig c = small({name}, {2}, 2000);
    CellOptions o;
    o.keep_trace = true;
    const auto r = run_cell(c, {name, 2, 3}, o);
    REQUIRE(r.valid);
    std::stringstream s;
    write_trace(s, r);
    const auto rr = replay_trace(s);
    CHECK(rr.ok);
    CHECK(rr.steps == r.steps);
    CHECK(rr.hash == r.final_hash);
  }
  std::istringstream broken(R"({"type":"header","resolution":40,"epsilon_ticks":68719476736})"
                            "\n"
                            R"({"step":0,"op":"delete","id":4,"size":1,"placed_at":0,"moves":[],"resizes":[],"moved":0})");
  CHECK_FALSE(replay_trace(broken).ok);
}

TEST_CASE("runs are deterministic and the parallel runner matches the serial one") {
  ExperimentConfig c = small({"folklore", "simple", "rsum", "block"}, {2, 3}, 3000);
  c.validate = ValidateMode::Final;
  const auto cells = expand_cells(c);
  const auto a = run_cells_serial(c, cells);
  const auto b = run_cells_parallel(c, cells);
  REQUIRE(a.size() == b.size());
  std::ostringstream ca, cb;
  write_csv(ca, a);
  write_csv(cb, b);
  CHECK(ca.str() == cb.str());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].cell == b[i].cell);
    CHECK(a[i].final_hash == b[i].final_hash);
  }

  CellOptions o;
  o.keep_trace = true;
  std::ostringstream t1, t2;
  write_trace(t1, run_cell(c, cells[0], o));
  write_trace(t2, run_cell(c, cells[0], o));
  CHECK(t1.str() == t2.str());
}
