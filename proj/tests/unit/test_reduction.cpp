#include "generators.hpp"

#include "hamlab/models.hpp"
#include "hamlab/reduction.hpp"

#include <doctest.h>

#include <cmath>

using namespace hamlab;

namespace {

// Component of v in ker dH (Euclidean projection).
Vec into_kernel(const Vec& grad, const Vec& v) { return v - grad.dot(v) / grad.squaredNorm() * grad; }

// Distance of v from span{x}.
double off_span(const Vec& x, const Vec& v) { return (v - x.dot(v) / x.squaredNorm() * x).norm(); }

}  // namespace

TEST_SUITE("reduction") {
  TEST_CASE("one degree of freedom reduces to a point") {
    const model m = instantiate("harmonic_oscillator");
    testgen::gen g(1);
    const phase_point a = g.point(m);
    const reduced_space rs = reduce_space(m.system, a);
    CHECK(rs.trivial);
    CHECK(rs.basis.cols() == 0);
    CHECK(reduced_local(m.system, a.coords, a.chart).trivial);
    CHECK(reduced_jacobi_frame(m.system, a, {0.0, 1.0}).trivial);
  }

  TEST_CASE("sphere reduced space has dimension two and a nondegenerate form") {
    const model m = instantiate("sphere_geodesic");
    testgen::gen g(2);
    const reduced_space rs = reduce_space(m.system, g.point(m));
    REQUIRE(rs.basis.cols() == 2);
    Eigen::JacobiSVD<Mat> svd(rs.omega);
    CHECK(svd.singularValues().minCoeff() > 1e-3);
  }

  TEST_CASE("lift of the projection is the identity modulo the field") {
    testgen::gen g(3);
    for (const std::string name : {"sphere_geodesic", "flat_magnetic", "perturbed_hyperbolic"}) {
      CAPTURE(name);
      const model m = instantiate(name);
      const phase_point a = g.point(m);
      const reduced_space rs = reduce_space(m.system, a);
      const Vec grad = m.system.dH(a.coords);
      for (int k = 0; k < 5; ++k) {
        const Vec w = into_kernel(grad, g.vector(4));
        CHECK(off_span(rs.field, rs.lift(rs.project(w)) - w) < 1e-10 * w.norm());
      }
    }
  }

  TEST_CASE("reduced curvature on constant curvature surfaces") {
    testgen::gen g(4);
    const std::vector<std::pair<std::string, double>> cases = {
        {"flat_torus_geodesic", 0.0}, {"sphere_geodesic", 1.0}, {"hyperbolic_plane_geodesic", -1.0}};
    for (const auto& [name, expected] : cases) {
      CAPTURE(name);
      const model m = instantiate(name);
      const reduced_frame_result r = reduced_jacobi_frame(m.system, g.point(m), uniform_grid(4.0, 0.5));
      for (const Mat& c : r.curvature) CHECK(std::abs(c(0, 0) - expected) < 1e-7);
      CHECK(r.max_darboux_residual < 1e-8);
    }
  }

  TEST_CASE("reduced curvature is 2 c K on the perturbed half-plane") {
    const model m = instantiate("perturbed_hyperbolic");
    testgen::gen g(5);
    for (int k = 0; k < 3; ++k) {
      const phase_point a = g.point(m);
      const reduced_local_frame r = reduced_local(m.system, a.coords, a.chart);
      CHECK(std::abs(r.R(0, 0) - 2.0 * m.energy * m.oracles.gauss_curvature(a.coords.head(2))) < 1e-7);
    }
  }

  TEST_CASE("block formula on geodesic flows is pure extraction") {
    testgen::gen g(6);
    for (const std::string name : {"sphere_geodesic", "hyperbolic_plane_geodesic", "curvature_bump"}) {
      CAPTURE(name);
      const model m = instantiate(name);
      const reduced_formula_report f = reduced_curvature_via_formula(m.system, g.point(m));
      CHECK(f.omega_bar.norm() < 1e-6);
      CHECK(f.mismatch < 1e-6);
    }
  }

  TEST_CASE("block formula with a magnetic term") {
    const model m = instantiate("flat_magnetic", {{"b", 1.0}});
    testgen::gen g(7);
    const phase_point a = g.point(m);
    const reduced_formula_report f = reduced_curvature_via_formula(m.system, a);
    CHECK(f.omega_bar.norm() > 0.1);
    CHECK(f.mismatch < 1e-5);
    const quadratic_identity_report q = quadratic_identity(m.system, a, Vec::Ones(1));
    CHECK(q.correction_formula > 1e-3);
    CHECK(std::abs(q.correction_formula - q.correction_bracket) < 1e-5);
    CHECK(std::abs(q.reduced - q.full - q.correction_formula) < 1e-5);
  }

  TEST_CASE("no correction when the double bracket is omega-orthogonal to w") {
    const model m = instantiate("sphere_geodesic");
    testgen::gen g(8);
    const phase_point a = g.point(m);
    const Vec xi2 = double_bracket_normal(m.system, a.coords);
    const reduced_local_frame r = reduced_local(m.system, a.coords, a.chart);
    const Vec wv = r.E_full.leftCols(1) * Vec::Ones(1);
    REQUIRE(std::abs(omega(m.system.form(a.coords), xi2, wv)) < 1e-6);
    const quadratic_identity_report q = quadratic_identity(m.system, a, Vec::Ones(1));
    CHECK(std::abs(q.reduced - q.full) < 1e-6);
  }

  TEST_CASE("frame coordinates invert the frame expansion") {
    const model m = instantiate("hyperbolic_magnetic");
    testgen::gen g(9);
    const phase_point a = g.point(m);
    const reduced_local_frame r = reduced_local(m.system, a.coords, a.chart);
    const Mat form = m.system.form(a.coords);
    const Vec ab = g.vector(2);
    const Vec w = r.E * ab.head(1) + r.F * ab.tail(1) + 0.7 * m.system.field(a.coords);
    CHECK((frame_coordinates(form, r.E, r.F, w) - ab).norm() < 1e-10);
  }
}
