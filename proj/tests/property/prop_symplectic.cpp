#include "generators.hpp"

#include "hamlab/models.hpp"
#include "hamlab/symplectic.hpp"

#include <doctest.h>

#include <cmath>

using namespace hamlab;

namespace {

// Fourth-order central differences of H, independent of the model closures.
Vec numeric_gradient(const phase_system& s, const Vec& z) {
  const double h = 1e-3;
  Vec g(z.size());
  for (int i = 0; i < z.size(); ++i) {
    auto at = [&](double d) {
      Vec y = z;
      y(i) += d;
      return s.H(y);
    };
    g(i) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  }
  return g;
}

// Fiber Hessian expected from the model definition: 1 for mechanical systems,
// 2 H(x, e_1) I for conformal metrics (H = |p|^2 e^{-2 psi} / 2).
Mat expected_fiber_hessian(const model& m, const Vec& z) {
  if (m.system.n == 1) return Mat::Identity(1, 1);
  Vec unit = z;
  unit.tail(2) << 1.0, 0.0;
  return 2.0 * m.system.H(unit) * Mat::Identity(2, 2);
}

}  // namespace

TEST_SUITE("symplectic-core properties") {
  TEST_CASE("the field satisfies omega(X, .) = -dH on a random basis") {
    for (const auto& name : model_names()) {
      const model m = instantiate(name);
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(name);
        CAPTURE(seed);
        testgen::gen g(seed);
        const phase_point a = g.point(m);
        const Vec x = hamiltonian_vector_field(m.system, a).components;
        const Vec grad = numeric_gradient(m.system, a.coords);
        const Mat w = m.system.form(a.coords);
        double worst = 0.0;
        for (int k = 0; k < 4; ++k) {
          const Vec v = g.vector(m.system.dim());
          worst = std::max(worst, std::abs(omega(w, x, v) + grad.dot(v)) / v.norm());
        }
        CHECK(worst < 1e-9);
      }
    }
  }

  TEST_CASE("energy drift stays below tol (1 + T)") {
    for (const auto& name : model_names()) {
      const model m = instantiate(name);
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        CAPTURE(name);
        CAPTURE(seed);
        testgen::gen g(100 + seed);
        const double T = g.uniform(1.0, 20.0);
        const flow_options o;
        const flow_segment seg = flow(m.system, g.point(m), T, o);
        const double span = seg.truncated ? seg.exit_time : T;
        CHECK(seg.energy_drift < o.rtol * (1.0 + span));
      }
    }
  }

  TEST_CASE("linearized flow is symplectic up to T = 20") {
    for (const auto& name : model_names()) {
      const model m = instantiate(name);
      for (std::uint64_t seed = 1; seed <= 2; ++seed) {
        CAPTURE(name);
        CAPTURE(seed);
        testgen::gen g(200 + seed);
        const double T = g.uniform(1.0, 20.0);
        const flow_options o;
        const flow_segment seg = flow_on_grid(m.system, g.point(m), uniform_grid(T, 1.0), true, o);
        CHECK(seg.symplectic_drift < 100.0 * o.rtol);
      }
    }
  }

  TEST_CASE("monotone form is the fiber Hessian and ignores the magnetic term") {
    for (const auto& name : model_names()) {
      const model m = instantiate(name);
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(name);
        CAPTURE(seed);
        testgen::gen g(300 + seed);
        const phase_point a = g.point(m);
        const monotone_form_result r = monotone_form(m.system, a);
        CHECK(r.monotone);
        CHECK(max_abs(r.matrix - expected_fiber_hessian(m, a.coords)) < 1e-8);
      }
    }
  }

  TEST_CASE("flow composes: phi_s then phi_t equals phi_{s+t}") {
    for (const std::string name : {"sphere_geodesic", "perturbed_hyperbolic", "hyperbolic_magnetic", "pendulum"}) {
      const model m = instantiate(name);
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        CAPTURE(name);
        CAPTURE(seed);
        testgen::gen g(400 + seed);
        const phase_point a = g.point(m);
        const double s = g.uniform(0.2, 2.0), t = g.uniform(0.2, 2.0);
        flow_options o;
        o.allow_handoff = false;
        const flow_segment one = flow(m.system, a, s + t, o);
        const flow_segment first = flow(m.system, a, s, o);
        const flow_segment second = flow(m.system, first.states.back(), t, o);
        if (one.truncated || first.truncated || second.truncated) continue;
        CHECK((one.states.back().coords - second.states.back().coords).norm() < 1e-9);
      }
    }
  }
}
