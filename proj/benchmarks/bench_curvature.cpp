#include "hamlab/jacobi.hpp"
#include "hamlab/models.hpp"
#include "hamlab/reduction.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace hamlab;

phase_point start(const model& m) {
  std::mt19937_64 eng(11);
  return m.sample(eng);
}

void BM_curvature(benchmark::State& state, const char* name, curvature_method method) {
  const model m = instantiate(name);
  const phase_point a = start(m);
  for (auto _ : state) benchmark::DoNotOptimize(curvature_operator(m.system, a, method));
}

void BM_reduced_local(benchmark::State& state, const char* name) {
  const model m = instantiate(name);
  const phase_point a = start(m);
  for (auto _ : state) benchmark::DoNotOptimize(reduced_local(m.system, a.coords, a.chart));
}

void BM_canonical_frame(benchmark::State& state) {
  const model m = instantiate("perturbed_hyperbolic");
  const phase_point a = start(m);
  const jacobi_curve_sample c = jacobi_curve(m.system, a, uniform_grid(static_cast<double>(state.range(0)), 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(canonical_frame(m.system, c));
}

}  // namespace

BENCHMARK_CAPTURE(BM_curvature, sphere_frame, "sphere_geodesic", curvature_method::frame);
BENCHMARK_CAPTURE(BM_curvature, sphere_bracket, "sphere_geodesic", curvature_method::bracket);
BENCHMARK_CAPTURE(BM_curvature, magnetic_frame, "hyperbolic_magnetic", curvature_method::frame);
BENCHMARK_CAPTURE(BM_reduced_local, perturbed_hyperbolic, "perturbed_hyperbolic");
BENCHMARK_CAPTURE(BM_reduced_local, flat_magnetic, "flat_magnetic");
BENCHMARK(BM_canonical_frame)->Arg(5)->Arg(10);
