#include "generators.hpp"

#include "hamlab/models.hpp"
#include "hamlab/reduction.hpp"

#include <doctest.h>

#include <cmath>

using namespace hamlab;

namespace {

std::vector<std::string> surface_models() {
  std::vector<std::string> out;
  for (const auto& name : model_names())
    if (instantiate(name).system.n == 2) out.push_back(name);
  return out;
}

Mat with_field(const Mat& e, const Vec& x) {
  Mat out(e.rows(), e.cols() + 1);
  out << e, x;
  return out;
}

}  // namespace

TEST_SUITE("reduction properties") {
  TEST_CASE("direct reduced curvature matches the block formula") {
    for (const auto& name : surface_models()) {
      const model m = instantiate(name);
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(name);
        CAPTURE(seed);
        testgen::gen g(seed);
        const reduced_formula_report f = reduced_curvature_via_formula(m.system, g.point(m));
        CHECK(f.mismatch < 1e-5);
        CHECK(f.offdiag_mismatch < 1e-5);
        CHECK(f.corner_mismatch < 1e-5);
      }
    }
  }

  TEST_CASE("reduction never decreases the quadratic form") {
    for (const auto& name : surface_models()) {
      const model m = instantiate(name);
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(name);
        CAPTURE(seed);
        testgen::gen g(50 + seed);
        const phase_point a = g.point(m);
        const Vec w = g.vector(1);
        const quadratic_identity_report q = quadratic_identity(m.system, a, w);
        const double scale = 1.0 + w.squaredNorm();
        CHECK(q.reduced >= q.full - 1e-6 * scale);
        CHECK(std::abs(q.reduced - q.full - q.correction_formula) < 1e-5 * scale);
        CHECK(std::abs(q.correction_formula - q.correction_bracket) < 1e-5 * scale);
      }
    }
  }

  TEST_CASE("reduced frames are Darboux on [0, 10]") {
    for (const auto& name : surface_models()) {
      const model m = instantiate(name);
      CAPTURE(name);
      testgen::gen g(70);
      const reduced_frame_result r = reduced_jacobi_frame(m.system, g.point(m), uniform_grid(10.0, 0.5));
      CHECK(r.max_darboux_residual < 1e-8);
      CHECK(r.max_asymmetry < 1e-7);
    }
  }

  TEST_CASE("the reduced curve is equivariant under the flow") {
    for (const std::string name : {"sphere_geodesic", "perturbed_hyperbolic", "hyperbolic_magnetic", "curvature_bump"}) {
      const model m = instantiate(name);
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        CAPTURE(name);
        CAPTURE(seed);
        testgen::gen g(80 + seed);
        const phase_point a = g.point(m);
        const double s = g.uniform(0.2, 1.5), t = g.uniform(0.5, 3.0);
        const flow_segment to_b = flow_on_grid(m.system, a, {0.0, s}, true);
        REQUIRE_FALSE(to_b.truncated);
        const phase_point b = to_b.states.back();
        const Mat back = symplectic_inverse(to_b.monodromies.back(), m.system.form(a.coords), m.system.form(b.coords));

        const reduced_frame_result ra = reduced_jacobi_frame(m.system, a, {0.0, t});
        const reduced_frame_result rb = reduced_jacobi_frame(m.system, b, {0.0, t - s});
        const auto at = [](const reduced_frame_result& r, double time) {
          for (std::size_t k = 0; k < r.times.size(); ++k)
            if (r.times[k] == time) return r.E[k];
          return Mat();
        };
        const Vec x = m.system.field(a.coords);
        const Mat lhs = with_field(at(ra, t), x);
        const Mat rhs = with_field(back * at(rb, t - s), x);
        CHECK(largest_principal_angle(lhs, rhs) < 1e-6);
      }
    }
  }
}
