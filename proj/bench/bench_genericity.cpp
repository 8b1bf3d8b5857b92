// Serial reference against the OpenMP kernels. Thread count follows
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "tiltlab/genericity.hpp"
#include "tiltlab/library.hpp"

using namespace tiltlab;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_TiltSweep(benchmark::State& state) {
  ExperimentOptions o;
  o.sampling.v_lo = Vec::Constant(1, -3);
  o.sampling.v_hi = Vec::Constant(1, 3);
  o.sampling.count = 40;
  o.seed = 11;
  o.execution = mode(state);
  o.equivalence = false;
  const Problem p = TiltProblem{lib::double_well(), {}};
  for (auto _ : state) benchmark::DoNotOptimize(run_genericity_experiment(p, o));
  label(state);
}

void BM_CompositeSweep(benchmark::State& state) {
  const Polynomial x = Polynomial::variable(1, 0);
  const CompositeFamily fam{zero_function(1), indicator(lib::nonpositive_set()),
                            SmoothMap({x * x - Polynomial::constant(1, 1.0)}),
                            {Vec::Constant(1, -0.9), Vec::Constant(1, 0.9)}, Vec::Constant(1, 0.5)};
  ExperimentOptions o;
  o.sampling.v_lo = Vec::Constant(1, -1);
  o.sampling.v_hi = Vec::Constant(1, 1);
  o.sampling.y_lo = Vec::Constant(1, -1);
  o.sampling.y_hi = Vec::Constant(1, 1);
  o.sampling.count = 100;
  o.sampling.exclude_v_radius = 1e-3;
  o.seed = 12;
  o.execution = mode(state);
  o.equivalence = false;
  const Problem p = fam;
  for (auto _ : state) benchmark::DoNotOptimize(run_genericity_experiment(p, o));
  label(state);
}

// The atlas has no serial path; one OpenMP thread stands in for it.
void BM_Atlas(benchmark::State& state) {
  const GridSpec grid{Vec::Constant(1, -3), Vec::Constant(1, 3), 601};
  const int saved = omp_get_max_threads();
  if (state.range(0) == 0) omp_set_num_threads(1);
  for (auto _ : state) benchmark::DoNotOptimize(build_selection_atlas(lib::double_well(), grid));
  omp_set_num_threads(saved);
  label(state);
}

}  // namespace

BENCHMARK(BM_TiltSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CompositeSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Atlas)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
