#include "generators.hpp"
#include "oracles.hpp"

#include "hamlab/error.hpp"
#include "hamlab/riccati.hpp"
#include "hamlab/symplectic.hpp"

#include <doctest.h>

#include <cmath>

using namespace hamlab;

namespace {

riccati_problem scalar_constant(double r) { return riccati_problem::constant(Mat::Constant(1, 1, r)); }

fundamental_solution from_zero(const riccati_problem& p, double T, double spacing = 0.05) {
  return solve_linear(p, Mat::Zero(p.m, p.m), Mat::Identity(p.m, p.m), uniform_grid(T, spacing));
}

}  // namespace

TEST_SUITE("riccati") {
  TEST_CASE("fundamental solutions of constant scalar problems") {
    for (double r : {-4.0, 0.0, 2.25}) {
      CAPTURE(r);
      const fundamental_solution f = from_zero(scalar_constant(r), 3.0);
      for (std::size_t i = 0; i < f.times.size(); ++i)
        CHECK(std::abs(f.B[i](0, 0) - oracle::jacobi_field(r, f.times[i])) < 1e-8);
      CHECK(f.wronskian_drift < 1e-8);
    }
  }

  TEST_CASE("first zero of B for positive curvature") {
    const double k = 1.5;
    const fundamental_solution f = from_zero(scalar_constant(k * k), 4.0);
    REQUIRE(f.first_singular_time.has_value());
    CHECK(std::abs(*f.first_singular_time - oracle::pi / k) < 1e-8);
  }

  TEST_CASE("Riccati solutions coth, 1/t and cot") {
    for (double r : {-1.0, 0.0, 1.0}) {
      CAPTURE(r);
      const riccati_problem p = scalar_constant(r);
      const riccati_solution s = riccati_from_fundamental(p, from_zero(p, 3.0));
      for (std::size_t i = 0; i < s.times.size(); ++i) {
        const double t = s.times[i];
        if (t < 0.1) continue;
        CHECK(std::abs(s.S[i](0, 0) - oracle::riccati_singular_start(r, t)) < 1e-7);
      }
      CHECK(s.residual < 1e-6);
    }
  }

  TEST_CASE("direct Riccati integration agrees with the fundamental solution") {
    testgen::gen g(1);
    const Mat r = -g.psd(3);
    const riccati_problem p = riccati_problem::constant(r);
    const std::vector<double> grid = uniform_grid(2.0, 0.1);
    const Mat s0 = g.psd(3) + Mat::Identity(3, 3);
    const riccati_solution direct = solve_riccati(p, s0, grid);
    const fundamental_solution f = solve_linear(p, Mat::Identity(3, 3), s0, grid);
    const riccati_solution via = riccati_from_fundamental(p, f);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(max_abs(direct.S[i] - via.S[i]) < 1e-9);
  }

  TEST_CASE("two-point solution of the flat problem is 1 - t / s") {
    const riccati_problem p = scalar_constant(0.0);
    const two_point_solution tp = two_point(p, 2.0, uniform_grid(2.0, 0.1));
    for (std::size_t i = 0; i < tp.times.size(); ++i) {
      const double t = tp.times[i];
      CHECK(std::abs(tp.D[i](0, 0) - (1.0 - t / 2.0)) < 1e-10);
      if (t < 2.0 - 1e-9) CHECK(std::abs(tp.U[i](0, 0) + 1.0 / (2.0 - t)) < 1e-8);
    }
    CHECK(tp.boundary_residual < 1e-10);
  }

  TEST_CASE("D(s, 0) is the identity") {
    testgen::gen g(2);
    for (int k = 0; k < 5; ++k) {
      const Mat r = -g.psd(2);
      const two_point_solution tp = two_point(riccati_problem::constant(r), 3.0, uniform_grid(3.0, 0.25));
      CHECK(max_abs(tp.D.front() - Mat::Identity(2, 2)) < 1e-10);
    }
  }

  TEST_CASE("U(s, 0) approaches -1 on the hyperbolic problem") {
    const riccati_problem p = scalar_constant(-1.0);
    for (double s : {5.0, 10.0, 20.0}) {
      const std::vector<Mat> u = two_point_U(p, s, {0.0});
      CHECK(std::abs(u[0](0, 0) - 1.0 / std::tanh(-s)) < 1e-10);
    }
  }

  TEST_CASE("limits of the hyperbolic problem") {
    const riccati_problem p = scalar_constant(-1.0);
    const std::vector<double> grid = uniform_grid(2.0, 0.5);
    const limit_solution plus = limit_riccati(p, limit_direction::plus, grid);
    const limit_solution minus = limit_riccati(p, limit_direction::minus, grid);
    CHECK(plus.converged);
    CHECK(minus.converged);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(std::abs(plus.U[i](0, 0) + 1.0) < 1e-8);
      CHECK(std::abs(minus.U[i](0, 0) - 1.0) < 1e-8);
    }
  }

  TEST_CASE("flat limit converges only algebraically") {
    const riccati_problem p = scalar_constant(0.0);
    limit_options o;
    o.tol = 1e-3;
    o.max_horizon = 1e5;
    const limit_solution plus = limit_riccati(p, limit_direction::plus, {0.0}, o);
    CHECK(plus.converged);
    CHECK(std::abs(plus.U[0](0, 0)) < 1e-3);
    REQUIRE_FALSE(plus.D.empty());
    CHECK(std::abs(plus.D[0](0, 0) - 1.0) < 1e-12);
  }

  TEST_CASE("periodic curvature gives a periodic stable limit") {
    const riccati_problem p = riccati_problem::scalar([](double t) { return -(2.0 + std::sin(t)); });
    const std::vector<double> grid = {0.0, 2 * oracle::pi};
    limit_options o;
    o.tol = 1e-9;
    const limit_solution plus = limit_riccati(p, limit_direction::plus, grid, o);
    REQUIRE(plus.converged);
    CHECK(std::abs(plus.U[0](0, 0) - plus.U[1](0, 0)) < 1e-8);
  }

  TEST_CASE("comparison of coth and 1/t") {
    const double eps = 0.1;
    const std::vector<double> grid = uniform_grid(4.9, 0.1);
    std::vector<double> shifted;
    for (double t : grid) shifted.push_back(t + eps);
    // S1 = 1/t for R1 = 0 and S2 = coth t for R2 = -1, both started at eps
    const comparison_report r =
        comparison_check(scalar_constant(0.0), scalar_constant(-1.0), Mat::Constant(1, 1, 1.0 / eps),
                         Mat::Constant(1, 1, 1.0 / std::tanh(eps)), shifted);
    REQUIRE(r.accepted);
    CHECK(r.worst >= -1e-10);
  }

  TEST_CASE("identical problems compare to zero") {
    testgen::gen g(3);
    const riccati_problem p = riccati_problem::constant(-g.psd(3));
    const Mat s0 = g.psd(3);
    const comparison_report r = comparison_check(p, p, s0, s0, uniform_grid(3.0, 0.25));
    REQUIRE(r.accepted);
    for (double e : r.min_eig) CHECK(std::abs(e) < 1e-12);
  }

  TEST_CASE("comparison refuses misordered data") {
    const comparison_report r = comparison_check(scalar_constant(-1.0), scalar_constant(0.0), Mat::Ones(1, 1),
                                                 Mat::Ones(1, 1), uniform_grid(1.0, 0.5));
    CHECK_FALSE(r.accepted);
    CHECK_FALSE(r.reason.empty());
  }

  TEST_CASE("blowup certificates") {
    const fundamental_solution hyp = from_zero(scalar_constant(-1.0), 4.0, 0.01);
    const blowup_report r1 = blowup_certificate(hyp, 10.0);
    REQUIRE(r1.reached);
    CHECK(std::abs(r1.T - std::asinh(10.0)) < 0.1);

    const fundamental_solution flat = from_zero(scalar_constant(0.0), 6.0, 0.01);
    const blowup_report r2 = blowup_certificate(flat, 5.0);
    REQUIRE(r2.reached);
    CHECK(std::abs(r2.T - 5.0) < 0.011);

    const Mat r = (Mat(2, 2) << 0, 0, 0, -1).finished();
    const fundamental_solution mixed = from_zero(riccati_problem::constant(r), 6.0, 0.01);
    const blowup_report r3 = blowup_certificate(mixed, 5.0);
    REQUIRE(r3.reached);
    CHECK(std::abs(r3.T - 5.0) < 0.011);
  }

  TEST_CASE("declared bounds are verified") {
    riccati_problem p = scalar_constant(-1.0);
    p.k = 0.5;  // R >= -0.25 is false
    CHECK_THROWS_AS(p.verify_bounds(0.0, 1.0), hamlab_error);
    p.k = 1.0;
    CHECK_NOTHROW(p.verify_bounds(0.0, 1.0));
  }
}
