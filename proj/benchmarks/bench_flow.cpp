#include "hamlab/models.hpp"
#include "hamlab/symplectic.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace hamlab;

phase_point start(const model& m) {
  std::mt19937_64 eng(7);
  return m.sample(eng);
}

void BM_flow(benchmark::State& state, const char* name) {
  const model m = instantiate(name);
  const phase_point a = start(m);
  const double T = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(flow(m.system, a, T));
}

void BM_linearized_flow(benchmark::State& state, const char* name) {
  const model m = instantiate(name);
  const phase_point a = start(m);
  const std::vector<double> grid = uniform_grid(static_cast<double>(state.range(0)), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(flow_on_grid(m.system, a, grid, true));
}

}  // namespace

BENCHMARK_CAPTURE(BM_flow, harmonic_oscillator, "harmonic_oscillator")->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_flow, hyperbolic_plane, "hyperbolic_plane_geodesic")->Arg(10);
BENCHMARK_CAPTURE(BM_flow, sphere, "sphere_geodesic")->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_linearized_flow, perturbed_hyperbolic, "perturbed_hyperbolic")->Arg(10);
BENCHMARK_CAPTURE(BM_linearized_flow, hyperbolic_magnetic, "hyperbolic_magnetic")->Arg(10);
