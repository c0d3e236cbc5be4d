#include "mrlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "mrlab/block.hpp"
#include "mrlab/flex.hpp"
#include "mrlab/folklore.hpp"
#include "mrlab/geo.hpp"
#include "mrlab/oracles.hpp"
#include "mrlab/rsum.hpp"
#include "mrlab/simple.hpp"

namespace mrlab {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

SizeBound parse_bound(const json& j, const std::string& where) {
  only_keys(j, {"scale", "eps_pow"}, where);
  SizeBound b;
  if (j.contains("scale")) b.scale = get<double>(j, "scale", where);
  if (j.contains("eps_pow")) b.eps_pow = get<double>(j, "eps_pow", where);
  if (!(b.scale > 0) || b.eps_pow < 0) throw ConfigError(where + ": need scale > 0 and eps_pow >= 0");
  return b;
}

WorkloadKind parse_kind(const std::string& s) {
  if (s == "regime") return WorkloadKind::Regime;
  if (s == "fuzz") return WorkloadKind::Fuzz;
  if (s == "random_item") return WorkloadKind::RandomItem;
  if (s == "lower_bound") return WorkloadKind::LowerBound;
  throw ConfigError("workload.kind: unknown kind '" + s + "'");
}

const char* kind_name(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::Regime: return "regime";
    case WorkloadKind::Fuzz: return "fuzz";
    case WorkloadKind::RandomItem: return "random_item";
    case WorkloadKind::LowerBound: return "lower_bound";
  }
  return "regime";
}

bool known_allocator(const std::string& name) {
  const auto& v = allocator_names();
  return std::find(v.begin(), v.end(), name) != v.end();
}

}  // namespace

Tick SizeBound::ticks(const TickConfig& cfg) const {
  const long double frac = static_cast<long double>(scale) * std::pow(static_cast<long double>(cfg.epsilon()), eps_pow);
  return std::max<Tick>(1, cfg.from_fraction(frac));
}

ExperimentConfig parse_config(const json& j) {
  only_keys(j,
            {"allocators", "eps_log4", "seeds", "resolution", "gamma", "validate", "self_check", "self_check_every",
             "workload"},
            "config");
  ExperimentConfig c;
  for (const char* key : {"allocators", "eps_log4", "seeds"})
    if (!j.contains(key)) throw ConfigError(std::string("config: missing required key '") + key + "'");
  c.allocators = get<std::vector<std::string>>(j, "allocators", "config");
  c.eps_log4 = get<std::vector<int>>(j, "eps_log4", "config");
  c.seeds = get<std::vector<std::uint64_t>>(j, "seeds", "config");
  if (c.allocators.empty() || c.eps_log4.empty() || c.seeds.empty())
    throw ConfigError("config: allocators, eps_log4 and seeds must be non-empty");
  for (const auto& a : c.allocators)
    if (!known_allocator(a)) throw ConfigError("config: unknown allocator '" + a + "'");
  for (int k : c.eps_log4)
    if (k < 1 || k > 15) throw ConfigError("config: eps_log4 entries must lie in [1, 15]");
  if (j.contains("resolution")) c.resolution = get<int>(j, "resolution", "config");
  if (j.contains("gamma")) c.gamma = get<double>(j, "gamma", "config");
  if (j.contains("validate")) {
    const auto v = get<std::string>(j, "validate", "config");
    if (v == "every")
      c.validate = ValidateMode::Every;
    else if (v == "final")
      c.validate = ValidateMode::Final;
    else
      throw ConfigError("config.validate: expected 'every' or 'final'");
  }
  if (j.contains("self_check")) c.self_check = get<bool>(j, "self_check", "config");
  if (j.contains("self_check_every")) c.self_check_every = get<std::size_t>(j, "self_check_every", "config");
  if (j.contains("workload")) {
    const json& w = j.at("workload");
    only_keys(w, {"kind", "updates", "size_lo", "size_hi", "target_load", "law", "delta_over_eps"}, "workload");
    auto& wl = c.workload;
    if (w.contains("kind")) wl.kind = parse_kind(get<std::string>(w, "kind", "workload"));
    if (w.contains("updates")) wl.updates = get<std::size_t>(w, "updates", "workload");
    if (w.contains("size_lo")) wl.size_lo = parse_bound(w.at("size_lo"), "workload.size_lo");
    if (w.contains("size_hi")) wl.size_hi = parse_bound(w.at("size_hi"), "workload.size_hi");
    if (w.contains("target_load")) wl.target_load = get<double>(w, "target_load", "workload");
    if (w.contains("law")) {
      const auto law = get<std::string>(w, "law", "workload");
      if (law == "uniform")
        wl.law = SizeLaw::Uniform;
      else if (law == "log_uniform")
        wl.law = SizeLaw::LogUniform;
      else
        throw ConfigError("workload.law: expected 'uniform' or 'log_uniform'");
    }
    if (w.contains("delta_over_eps")) wl.delta_over_eps = get<double>(w, "delta_over_eps", "workload");
    if (!(wl.delta_over_eps > 0)) throw ConfigError("workload.delta_over_eps must be positive");
  }
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["allocators"] = c.allocators;
  j["eps_log4"] = c.eps_log4;
  j["seeds"] = c.seeds;
  if (c.resolution) j["resolution"] = *c.resolution;
  j["gamma"] = c.gamma;
  j["validate"] = c.validate == ValidateMode::Every ? "every" : "final";
  j["self_check"] = c.self_check;
  j["self_check_every"] = c.self_check_every;
  const auto& w = c.workload;
  j["workload"] = {{"kind", kind_name(w.kind)},
                   {"updates", w.updates},
                   {"size_lo", {{"scale", w.size_lo.scale}, {"eps_pow", w.size_lo.eps_pow}}},
                   {"size_hi", {{"scale", w.size_hi.scale}, {"eps_pow", w.size_hi.eps_pow}}},
                   {"target_load", w.target_load},
                   {"law", w.law == SizeLaw::Uniform ? "uniform" : "log_uniform"},
                   {"delta_over_eps", w.delta_over_eps}};
  return j;
}

const std::vector<std::string>& allocator_names() {
  static const std::vector<std::string> names{"folklore", "simple", "geo", "combined", "rsum", "block"};
  return names;
}

std::vector<Cell> expand_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> out;
  for (const auto& a : cfg.allocators)
    for (int k : cfg.eps_log4)
      for (auto s : cfg.seeds) out.push_back({a, k, s});
  return out;
}

int cell_resolution(const ExperimentConfig& cfg, const Cell& cell) {
  if (cfg.resolution) return *cfg.resolution;
  int need = 40;
  if (cell.allocator == "geo" || cell.allocator == "block") need = std::max(need, 10 * cell.k);
  if (cell.allocator == "combined") need = std::max(need, 10 * (cell.k + 1));
  return need;
}

TickConfig cell_ticks(const ExperimentConfig& cfg, const Cell& cell) {
  const int r = cell_resolution(cfg, cell);
  if (r < 2 * cell.k + 8 || r > 62)
    throw ConfigError("resolution 2^" + std::to_string(r) + " unusable for " + cell.allocator +
                      " at eps_log4=" + std::to_string(cell.k) + " (valid up to 2^62)");
  auto tc = TickConfig::power_of_four(cell.k, r);
  try {
    tc.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return tc;
}

Tick cell_delta(const ExperimentConfig& cfg, const Cell& cell, const TickConfig& tc) {
  if (cfg.workload.kind == WorkloadKind::LowerBound) return tc.pow2_frac(cell.k);
  return std::max<Tick>(1, tc.from_fraction(static_cast<long double>(cfg.workload.delta_over_eps) * tc.epsilon()));
}

std::unique_ptr<Allocator> make_allocator(const ExperimentConfig& cfg, const Cell& cell, const TickConfig& tc) {
  const auto& a = cell.allocator;
  if (a == "folklore") return std::make_unique<FolkloreAllocator>(tc);
  if (a == "simple") return std::make_unique<SimpleAllocator>(tc);
  if (a == "geo") return std::make_unique<GeoAllocator>(tc, cell.seed);
  if (a == "combined") return std::make_unique<CombinedAllocator>(tc, cell.seed);
  if (a == "rsum") return std::make_unique<RsumAllocator>(tc, cell_delta(cfg, cell, tc), cell.seed);
  if (a == "block") return std::make_unique<BlockAllocator>(tc, cfg.gamma);
  throw ConfigError("unknown allocator '" + a + "'");
}

std::vector<UpdateEvent> cell_events(const ExperimentConfig& cfg, const Cell& cell, const TickConfig& tc) {
  const auto& w = cfg.workload;
  WorkloadSpec spec;
  spec.num_updates = w.updates;
  // the stream seed is decoupled from the allocator's coin flips
  spec.seed = cell.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(cell.k);
  const Tick eps = tc.epsilon_ticks;
  switch (w.kind) {
    case WorkloadKind::LowerBound:
      return gen_lower_bound(tc);
    case WorkloadKind::RandomItem:
      spec.kind = RandomItemWorkload{cell_delta(cfg, cell, tc)};
      return generate(spec, tc);
    case WorkloadKind::Fuzz: {
      const Tick lo = w.size_lo.ticks(tc);
      const Tick hi = std::max(lo, w.size_hi.ticks(tc) - 1);
      spec.kind = FuzzWorkload{lo, hi, w.target_load, w.law};
      return generate(spec, tc);
    }
    case WorkloadKind::Regime:
      break;
  }
  const auto& a = cell.allocator;
  if (a == "folklore" || a == "simple") {
    spec.kind = FuzzWorkload{eps, 2 * eps - 1, 0.9, SizeLaw::Uniform};
  } else if (a == "geo") {
    spec.kind = FuzzWorkload{tc.pow2_frac(10 * cell.k), tc.memory() - 1, 0.9, SizeLaw::LogUniform};
  } else if (a == "combined") {
    const Tick e4 = tc.pow2_frac(8 * cell.k);
    spec.kind = FuzzWorkload{std::max<Tick>(1, e4 / 64), tc.pow2_frac(3) - 1, 0.85, SizeLaw::LogUniform};
  } else if (a == "rsum") {
    spec.kind = RandomItemWorkload{cell_delta(cfg, cell, tc)};
  } else if (a == "block") {
    const auto reg = BlockAllocator::default_regime(tc, cfg.gamma);
    spec.kind = FuzzWorkload{reg.lo, reg.hi, 0.9, SizeLaw::Uniform};
  } else {
    throw ConfigError("unknown allocator '" + a + "'");
  }
  return generate(spec, tc);
}

void check_config(const ExperimentConfig& cfg) {
  if (cfg.workload.updates == 0 && cfg.workload.kind != WorkloadKind::LowerBound)
    throw ConfigError("workload.updates must be positive");
  if (cfg.workload.kind == WorkloadKind::Fuzz) {
    if (cfg.workload.target_load < 0 || cfg.workload.target_load >= 1) throw ConfigError("workload.target_load must lie in [0, 1)");
  }
  std::set<std::pair<std::string, int>> seen;
  for (const auto& cell : expand_cells(cfg)) {
    if (!seen.insert({cell.allocator, cell.k}).second) continue;
    const auto tc = cell_ticks(cfg, cell);
    try {
      (void)make_allocator(cfg, cell, tc);
      if (cfg.workload.kind == WorkloadKind::LowerBound) (void)gen_lower_bound(tc);
      if (cfg.workload.kind == WorkloadKind::Fuzz) {
        const Tick lo = cfg.workload.size_lo.ticks(tc);
        if (lo >= cfg.workload.size_hi.ticks(tc)) throw ConfigError("workload: size_lo must be below size_hi");
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(cell.allocator + " at eps_log4=" + std::to_string(cell.k) + ": " + e.what());
    }
  }
}

CellResult run_cell(const ExperimentConfig& cfg, const Cell& cell, const CellOptions& opts) {
  CellResult r;
  r.cell = cell;
  const auto tc = cell_ticks(cfg, cell);
  r.resolution = tc.resolution_log2;
  r.epsilon_ticks = tc.epsilon_ticks;
  r.epsilon = tc.epsilon();
  if (cell.allocator == "rsum" || cfg.workload.kind == WorkloadKind::RandomItem ||
      cfg.workload.kind == WorkloadKind::LowerBound)
    r.delta = static_cast<double>(tc.to_fraction(cell_delta(cfg, cell, tc)));
  auto alloc = make_allocator(cfg, cell, tc);
  const auto events = cell_events(cfg, cell, tc);

  RunOptions ro;
  ro.validate = cfg.validate;
  ro.self_check = cfg.self_check;
  ro.self_check_every = cfg.self_check_every;
  if (opts.keep_trace || opts.observer) {
    ro.on_step = [&](const StepView& v) {
      if (opts.keep_trace) r.trace.push_back({v.event, v.result, v.moved_mass});
      if (opts.observer) opts.observer(*alloc, v);
    };
  }
  auto out = run_events(*alloc, events, tc, ro);
  r.steps = out.steps;
  r.valid = out.valid;
  r.failure = out.failure;
  r.violations = out.violations;
  r.final_hash = out.final_hash;
  if (!out.ledger.empty()) r.metrics = amortized_metrics(out.ledger);
  const auto st = alloc->stats();
  r.max_waste = static_cast<double>(tc.to_fraction(st.max_waste));
  r.rebuilds = st.rebuilds;
  r.extra = st.extra;
  return r;
}

std::vector<CellResult> run_cells_serial(const ExperimentConfig& cfg, const std::vector<Cell>& cells) {
  std::vector<CellResult> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(run_cell(cfg, c));
  return out;
}

std::vector<CellResult> run_cells_parallel(const ExperimentConfig& cfg, const std::vector<Cell>& cells) {
  std::vector<CellResult> out(cells.size());
  std::vector<std::string> errors(cells.size());
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = run_cell(cfg, cells[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error(e);
  return out;
}

Fit fit_cost_exponent(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("fit_cost_exponent: need at least 3 points");
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0) || !(y > 0)) throw std::invalid_argument("fit_cost_exponent: values must be positive");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double n = static_cast<double>(points.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx, dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 1e-24) throw std::invalid_argument("fit_cost_exponent: x values are all equal");
  Fit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy <= 1e-24 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

std::map<std::string, std::vector<std::pair<double, double>>> scaling_points(const std::vector<CellResult>& results) {
  std::map<std::string, std::map<int, std::pair<double, int>>> acc;
  std::map<int, double> inv;
  for (const auto& r : results) {
    if (r.steps == 0) continue;
    auto& [sum, cnt] = acc[r.cell.allocator][r.cell.k];
    sum += r.metrics.mass_ratio;
    ++cnt;
    inv[r.cell.k] = 1.0 / r.epsilon;
  }
  std::map<std::string, std::vector<std::pair<double, double>>> out;
  for (const auto& [name, by_k] : acc)
    for (const auto& [k, sc] : by_k) out[name].push_back({inv[k], sc.first / sc.second});
  return out;
}

void write_csv(std::ostream& out, const std::vector<CellResult>& results) {
  out << "allocator,epsilon,delta,seed,steps,ratio_mean,mass_ratio,max_waste,rebuild_count\n";
  for (const auto& r : results)
    out << r.cell.allocator << ',' << num(r.epsilon) << ',' << num(r.delta) << ',' << r.cell.seed << ',' << r.steps << ','
        << num(r.metrics.ratio_mean) << ',' << num(r.metrics.mass_ratio) << ',' << num(r.max_waste) << ','
        << r.rebuilds << '\n';
}

void write_trace(std::ostream& out, const CellResult& r) {
  json head{{"type", "header"},         {"allocator", r.cell.allocator}, {"eps_log4", r.cell.k},
            {"seed", r.cell.seed},      {"resolution", r.resolution},    {"epsilon_ticks", r.epsilon_ticks}};
  out << head.dump() << '\n';
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const auto& t = r.trace[i];
    json moves = json::array(), resizes = json::array();
    for (const auto& m : t.result.moves) moves.push_back({m.id, m.from, m.to});
    for (const auto& z : t.result.resizes) resizes.push_back({z.id, z.logical});
    json step{{"step", i},
              {"op", t.event.kind == EventKind::Insert ? "insert" : "delete"},
              {"id", t.event.id},
              {"size", t.event.size},
              {"placed_at", t.result.placed_at},
              {"moves", moves},
              {"resizes", resizes},
              {"moved", t.moved}};
    out << step.dump() << '\n';
  }
  json tail{{"type", "summary"},  {"steps", r.steps},           {"valid", r.valid},
            {"failure", r.failure}, {"final_hash", r.final_hash}, {"mass_ratio", r.metrics.mass_ratio}};
  out << tail.dump() << '\n';
}

void write_svg(std::ostream& out, const std::map<std::string, std::vector<std::pair<double, double>>>& series) {
  const double W = 640, H = 400, pad = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& [_, pts] : series)
    for (const auto& [x, y] : pts) {
      if (!(x > 0) || !(y > 0)) continue;
      x0 = std::min(x0, std::log10(x));
      x1 = std::max(x1, std::log10(x));
      y0 = std::min(y0, std::log10(y));
      y1 = std::max(y1, std::log10(y));
    }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-9) x1 = x0 + 1;
  if (y1 - y0 < 1e-9) y1 = y0 + 1;
  auto px = [&](double x) { return pad + (std::log10(x) - x0) / (x1 - x0) * (W - 2 * pad); };
  auto py = [&](double y) { return H - pad - (std::log10(y) - y0) / (y1 - y0) * (H - 2 * pad); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">1/eps (log)</text>\n";
  out << "<text x=\"14\" y=\"" << H / 2 << "\" transform=\"rotate(-90 14 " << H / 2
      << ")\" text-anchor=\"middle\">mass ratio (log)</text>\n";
  std::size_t c = 0;
  for (const auto& [name, pts] : series) {
    const char* color = colors[c % 6];
    out << "<polyline id=\"" << name << "\" fill=\"none\" stroke=\"" << color << "\" points=\"";
    bool first = true;
    for (const auto& [x, y] : pts) {
      if (!(x > 0) || !(y > 0)) continue;
      out << (first ? "" : " ") << num(px(x)) << ',' << num(py(y));
      first = false;
    }
    out << "\"/>\n";
    out << "<text x=\"" << W - pad + 4 << "\" y=\"" << pad + 16 * static_cast<double>(c) << "\" fill=\"" << color
        << "\" font-size=\"12\">" << name << "</text>\n";
    ++c;
  }
  out << "</svg>\n";
}

ReplayResult replay_trace(std::istream& in) {
  ReplayResult rr;
  std::string line;
  std::optional<World> world;
  bool summary = false;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.contains("type") && j["type"] == "header") {
        TickConfig tc{j.at("resolution").get<int>(), j.at("epsilon_ticks").get<Tick>()};
        tc.check();
        world.emplace(tc);
        continue;
      }
      if (j.contains("type") && j["type"] == "summary") {
        rr.recorded_hash = j.at("final_hash").get<std::uint64_t>();
        summary = true;
        continue;
      }
      if (!world) throw std::runtime_error("step before header");
      const Tick size = j.at("size").get<Tick>();
      const auto id = j.at("id").get<ItemId>();
      const UpdateEvent ev = j.at("op") == "insert" ? UpdateEvent::insert(id, size) : UpdateEvent::erase(id, size);
      UpdateResult res;
      res.placed_at = j.at("placed_at").get<Tick>();
      for (const auto& m : j.at("moves")) res.moves.push_back({m[0].get<ItemId>(), m[1].get<Tick>(), m[2].get<Tick>()});
      for (const auto& z : j.at("resizes")) res.resizes.push_back({z[0].get<ItemId>(), z[1].get<Tick>()});
      world->apply(ev, res);
      ++rr.steps;
    }
  } catch (const std::exception& e) {
    rr.failure = "line " + std::to_string(lineno) + ": " + e.what();
    return rr;
  }
  if (!world) {
    rr.failure = "no header";
    return rr;
  }
  if (!summary) {
    rr.failure = "no summary line";
    return rr;
  }
  rr.hash = layout_hash(world->layout(), world->items());
  rr.ok = rr.hash == rr.recorded_hash;
  if (!rr.ok) rr.failure = "final layout hash differs from the recorded one";
  return rr;
}

namespace {

double three_sigma(double p, std::uint64_t trials) {
  return 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(trials));
}

}  // namespace

std::vector<LemmaCheck> verify_lemmas(const LemmaOptions& o) {
  std::vector<LemmaCheck> out;
  std::uint64_t seed = o.seed;

  for (std::int64_t N : {128, 512}) {
    const std::int64_t lo = (N + 3) / 4, hi = (N + 2) / 3;
    const std::string prm = "N=" + std::to_string(N);
    const auto below = mc_discrete_threshold(N, lo - 1, o.trials, seed++);
    out.push_back({"discrete_unreachable", prm + " y=" + std::to_string(lo - 1), below.frequency(), 0.0, below.hits == 0});
    const auto first = mc_discrete_threshold(N, lo, o.trials, seed++);
    const double p = 1.0 / static_cast<double>(hi - lo + 1);
    const double dev = std::abs(first.frequency() - p);
    out.push_back({"discrete_first_step", prm + " y=" + std::to_string(lo), dev, three_sigma(p, o.trials),
                   dev <= three_sigma(p, o.trials)});
    const auto sweep = mc_discrete_sweep(N, 10 * N, o.trials, seed++);
    double worst = 0;
    for (std::size_t y = 1; y < sweep.size(); ++y) worst = std::max(worst, sweep[y].frequency());
    const double b = 100.0 / static_cast<double>(N);
    const double bound = b + three_sigma(std::min(b, 1.0), o.trials);
    out.push_back({"discrete_max_hit", prm + " y=1.." + std::to_string(10 * N), worst, bound, worst <= bound});
  }

  {
    constexpr int windows = 200;
    std::vector<double> freq(windows);
    const std::uint64_t base = seed;
    seed += windows;
#pragma omp parallel for schedule(static)
    for (int q = 0; q < windows; ++q) {
      const double a = 0.05 * q;
      freq[static_cast<std::size_t>(q)] =
          mc_continuous_threshold(1.0, a, a + 0.01, o.trials, base + static_cast<std::uint64_t>(q)).frequency();
    }
    const double worst = *std::max_element(freq.begin(), freq.end());
    const double bound = 0.04 + three_sigma(0.04, o.trials);
    out.push_back({"continuous_max_hit", "W=1 b-a=0.01 a=0..9.95", worst, bound, worst <= bound});
  }

  for (std::uint64_t n : {std::uint64_t{1} << 8, std::uint64_t{1} << 12}) {
    const auto est = mc_subset_theorem(n, o.subset_trials, seed++);
    out.push_back({"subset_success", "n=" + std::to_string(n), est.frequency(), 0.05, est.frequency() >= 0.05});
  }

  {
    std::mt19937_64 rng(seed++);
    bool flip_ok = true, all_b_ok = true;
    std::size_t tested = 0;
    for (std::size_t n = 1; n <= 64; n = n < 8 ? n + 1 : n * 2) {
      std::vector<PhiKind> kinds(n);
      for (auto& k : kinds) k = (rng() & 1) ? PhiKind::B : PhiKind::A;
      kinds[0] = PhiKind::A;
      auto flipped = kinds;
      flipped[0] = PhiKind::B;
      flip_ok = flip_ok && potential_phi(flipped) - potential_phi(kinds) == harmonic(n);
      all_b_ok = all_b_ok && potential_phi(std::vector<PhiKind>(n, PhiKind::B)) == static_cast<long long>(n);
      ++tested;
    }
    out.push_back({"phi_trailing_flip", std::to_string(tested) + " sizes n=1..64", flip_ok ? 1.0 : 0.0, 1.0, flip_ok});
    out.push_back({"phi_all_b", std::to_string(tested) + " sizes n=1..64", all_b_ok ? 1.0 : 0.0, 1.0, all_b_ok});
  }
  return out;
}

void write_lemma_csv(std::ostream& out, const std::vector<LemmaCheck>& checks) {
  out << "check,params,value,bound,pass\n";
  for (const auto& c : checks)
    out << c.name << ',' << c.params << ',' << num(c.value) << ',' << num(c.bound) << ',' << (c.pass ? 1 : 0) << '\n';
}

}  // namespace mrlab
