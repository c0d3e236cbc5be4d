// Serial reference runner against the OpenMP one, over the same cells.
#include <benchmark/benchmark.h>
#include <omp.h>

#include "mrlab/experiment.hpp"

using namespace mrlab;

namespace {

ExperimentConfig config(const std::string& alloc) {
  ExperimentConfig c;
  c.allocators = {alloc};
  c.eps_log4 = {2, 3};
  c.seeds = {1, 2, 3, 4};
  c.validate = ValidateMode::Final;
  c.self_check = false;
  c.workload.updates = 5000;
  return c;
}

void BM_Serial(benchmark::State& st, const std::string& alloc) {
  const auto c = config(alloc);
  const auto cells = expand_cells(c);
  for (auto _ : st) benchmark::DoNotOptimize(run_cells_serial(c, cells));
  st.counters["cells"] = static_cast<double>(cells.size());
}

void BM_Parallel(benchmark::State& st, const std::string& alloc) {
  const auto c = config(alloc);
  const auto cells = expand_cells(c);
  for (auto _ : st) benchmark::DoNotOptimize(run_cells_parallel(c, cells));
  st.counters["cells"] = static_cast<double>(cells.size());
  st.counters["threads"] = omp_get_max_threads();
}

}  // namespace

BENCHMARK_CAPTURE(BM_Serial, folklore, std::string("folklore"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Parallel, folklore, std::string("folklore"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Serial, geo, std::string("geo"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Parallel, geo, std::string("geo"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Serial, rsum, std::string("rsum"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Parallel, rsum, std::string("rsum"))->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
