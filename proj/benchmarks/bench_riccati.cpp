#include "hamlab/hyperbolicity.hpp"
#include "hamlab/models.hpp"
#include "hamlab/riccati.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

namespace {

using namespace hamlab;

riccati_problem periodic(int m) {
  riccati_problem p;
  p.m = m;
  p.curvature = [m](double t) {
    Mat r = -Mat::Identity(m, m);
    for (int i = 0; i < m; ++i) r(i, i) -= 0.5 * std::sin((i + 1) * t);
    return r;
  };
  return p;
}

void BM_solve_riccati(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const riccati_problem p = periodic(m);
  const std::vector<double> grid = uniform_grid(10.0, 0.1);
  const Mat s0 = Mat::Identity(m, m);
  for (auto _ : state) benchmark::DoNotOptimize(solve_riccati(p, s0, grid));
}

void BM_solve_linear(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const riccati_problem p = periodic(m);
  const std::vector<double> grid = uniform_grid(10.0, 0.1);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_linear(p, Mat::Zero(m, m), Mat::Identity(m, m), grid));
}

void BM_limit_riccati(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const riccati_problem p = periodic(m);
  const std::vector<double> grid = uniform_grid(2.0, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(limit_riccati(p, limit_direction::plus, grid));
}

void BM_invariant_distribution(benchmark::State& state, const char* name) {
  const model m = instantiate(name);
  std::mt19937_64 eng(3);
  const phase_point a = m.sample(eng);
  for (auto _ : state) benchmark::DoNotOptimize(build_invariant_distribution(m.system, a, +1));
}

void BM_conjugate_scan(benchmark::State& state) {
  const model m = instantiate("sphere_geodesic");
  std::mt19937_64 eng(5);
  const phase_point a = m.sample(eng);
  for (auto _ : state) benchmark::DoNotOptimize(conjugate_scan(m.system, a, 10.0));
}

}  // namespace

BENCHMARK(BM_solve_riccati)->Arg(1)->Arg(4);
BENCHMARK(BM_solve_linear)->Arg(1)->Arg(4);
BENCHMARK(BM_limit_riccati)->Arg(1)->Arg(3);
BENCHMARK_CAPTURE(BM_invariant_distribution, hyperbolic_plane, "hyperbolic_plane_geodesic");
BENCHMARK_CAPTURE(BM_invariant_distribution, perturbed_hyperbolic, "perturbed_hyperbolic");
BENCHMARK(BM_conjugate_scan)->Unit(benchmark::kMillisecond);
