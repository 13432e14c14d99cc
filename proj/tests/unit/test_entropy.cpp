#include "generators.hpp"

#include "hamlab/entropy.hpp"
#include "hamlab/models.hpp"

#include <doctest.h>

#include <cmath>

using namespace hamlab;

namespace {

sampler_options level_set(int samples, std::uint64_t seed = 5) {
  sampler_options o;
  o.samples = samples;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_SUITE("entropy") {
  TEST_CASE("Kahan sum keeps small terms") {
    std::vector<double> v = {1.0};
    for (int i = 0; i < 1000; ++i) v.push_back(1e-16);
    CHECK(kahan_sum(v) == doctest::Approx(1.0 + 1e-13).epsilon(1e-15));
  }

  TEST_CASE("batch means of a constant sequence") {
    CHECK(batch_means_stderr(std::vector<double>(64, 3.0), 8) == 0.0);
    // alternating 0, 1 in batches of eight: every batch mean is 1/2
    std::vector<double> v;
    for (int i = 0; i < 64; ++i) v.push_back(i % 2);
    CHECK(batch_means_stderr(v, 8) < 1e-15);
  }

  TEST_CASE("constant observable averages to one with zero error") {
    const model m = instantiate("sphere_geodesic");
    const estimate e = birkhoff_average(m, level_set(16), [](const phase_system&, const phase_point&) {
      return std::optional<double>(1.0);
    });
    CHECK(e.mean == 1.0);
    CHECK(e.std_error == 0.0);
    CHECK(e.used == 16);
  }

  TEST_CASE("reduced trace on constant curvature") {
    const model hyp = instantiate("hyperbolic_plane_geodesic");
    const estimate h = birkhoff_average(hyp, level_set(8), reduced_trace_observable());
    CHECK(std::abs(h.mean + 1.0) < 1e-7);
    CHECK(h.std_error < 1e-6);
    const model torus = instantiate("flat_torus_geodesic");
    const estimate t = birkhoff_average(torus, level_set(8), reduced_trace_observable());
    CHECK(std::abs(t.mean) < 1e-9);
    CHECK(t.std_error < 1e-9);
  }

  TEST_CASE("samples lie on the energy level and depend only on the seed") {
    const model m = instantiate("perturbed_hyperbolic");
    sampler_options o = level_set(6, 17);
    o.threads = 1;
    const std::vector<sample_path> a = draw_samples(m, o);
    o.threads = 3;
    const std::vector<sample_path> b = draw_samples(m, o);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a[i].start.energy - m.energy) < 1e-9);
      CHECK((a[i].start.coords - b[i].start.coords).norm() == 0.0);
    }
  }

  TEST_CASE("trajectory sampling places nodes after the burn-in") {
    const model m = instantiate("hyperbolic_plane_geodesic");
    sampler_options o = level_set(2);
    o.mode = sampling_mode::trajectory;
    o.burn_in = 1.0;
    o.horizon = 2.0;
    o.spacing = 0.5;
    const std::vector<sample_path> paths = draw_samples(m, o);
    for (const auto& p : paths) {
      CHECK_FALSE(p.discarded);
      CHECK(p.points.size() == 5);
      for (const auto& q : p.points) CHECK(std::abs(q.energy - m.energy) < 1e-9);
    }
  }

  TEST_CASE("unstable trace is 1 on the hyperbolic plane and undefined on the sphere") {
    testgen::gen g(3);
    const observable f = unstable_trace_observable();
    const model hyp = instantiate("hyperbolic_plane_geodesic");
    const auto h = f(hyp.system, g.point(hyp));
    REQUIRE(h.has_value());
    CHECK(std::abs(*h - 1.0) < 1e-8);
    const model sph = instantiate("sphere_geodesic");
    CHECK_FALSE(f(sph.system, g.point(sph)).has_value());
  }

  TEST_CASE("QR growth rate of vertical fields") {
    testgen::gen g(4);
    const model hyp = instantiate("hyperbolic_plane_geodesic");
    CHECK(std::abs(qr_lyapunov_sum(hyp.system, g.point(hyp), {}) - 1.0) < 1e-3);
    // on the torus the vertical field has frame coordinates (1, t), so the
    // rate over [3, 12] is log(sqrt(145) / sqrt(10)) / 9
    const model torus = instantiate("flat_torus_geodesic");
    CHECK(std::abs(qr_lyapunov_sum(torus.system, g.point(torus), {}) - 0.5 * std::log(14.5) / 9.0) < 1e-6);
  }

  TEST_CASE("window sampler rejects an empty window") {
    lyapunov_options l;
    l.burn = 5.0;
    l.horizon = 4.0;
    CHECK_THROWS(window_sampler(level_set(4), l));
    const sampler_options w = window_sampler(level_set(4), {});
    CHECK(w.mode == sampling_mode::trajectory);
    CHECK(w.burn_in == 3.0);
    CHECK(w.horizon == 9.0);
  }

  TEST_CASE("entropy bounds on the flat torus") {
    const model m = instantiate("flat_torus_geodesic");
    const ergodic_report r = entropy_bounds(m, level_set(8));
    CHECK(std::abs(r.entropy_estimate) < 1e-6);
    REQUIRE(r.bound1.has_value());
    CHECK(std::abs(*r.bound1) < 1e-6);
    CHECK(std::abs(r.bound2 - 0.5) < 1e-6);
    CHECK(r.bound1_holds);
    CHECK(r.bound2_holds);
  }

  TEST_CASE("sphere bound1 is flagged and bound2 vanishes") {
    const model m = instantiate("sphere_geodesic");
    const ergodic_report r = entropy_bounds(m, level_set(4));
    CHECK_FALSE(r.bound1.has_value());
    CHECK(std::abs(r.bound2) < 1e-6);
    CHECK_FALSE(r.notes.empty());
  }

  TEST_CASE("total curvature check") {
    const model torus = instantiate("flat_torus_geodesic");
    const total_curvature_report t = total_curvature_check(torus, level_set(6));
    CHECK(t.applicable);
    CHECK(t.pass);
    REQUIRE(t.max_abs.has_value());
    CHECK(*t.max_abs < 1e-9);

    const model sph = instantiate("sphere_geodesic");
    const total_curvature_report s = total_curvature_check(sph, level_set(3));
    CHECK_FALSE(s.applicable);
    CHECK_FALSE(s.note.empty());
  }
}
