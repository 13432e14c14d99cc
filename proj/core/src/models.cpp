#include "hamlab/models.hpp"

#include "hamlab/error.hpp"
#include "hamlab/rng.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace hamlab {

namespace {

constexpr double pi = std::numbers::pi;

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct scalar_field {
  std::function<double(const Vec2&)> value;
  std::function<Vec2(const Vec2&)> gradient;
  std::function<Mat2(const Vec2&)> hessian;
};

Mat2 rot() {
  Mat2 j;
  j << 0, 1, -1, 0;
  return j;
}

// Conformal metric e^{2 psi} |dx|^2 on a planar chart, optionally twisted by
// the magnetic two-form beta(x) dx1 ^ dx2.
phase_system conformal_system(const std::string& name, scalar_field psi, std::optional<scalar_field> beta,
                              std::function<bool(const Vec&)> domain) {
  phase_system s;
  s.name = name;
  s.n = 2;
  s.hamiltonian = [psi](const Vec& z) {
    const Vec2 x = z.head<2>();
    return 0.5 * std::exp(-2.0 * psi.value(x)) * z.tail<2>().squaredNorm();
  };
  s.gradient = [psi](const Vec& z) {
    const Vec2 x = z.head<2>();
    const Vec2 p = z.tail<2>();
    const double a = std::exp(-2.0 * psi.value(x));
    Vec g(4);
    g.head<2>() = -p.squaredNorm() * a * psi.gradient(x);
    g.tail<2>() = a * p;
    return g;
  };
  s.hessian = [psi](const Vec& z) {
    const Vec2 x = z.head<2>();
    const Vec2 p = z.tail<2>();
    const double a = std::exp(-2.0 * psi.value(x));
    const Vec2 gp = psi.gradient(x);
    const Mat2 hp = psi.hessian(x);
    Mat h = Mat::Zero(4, 4);
    h.topLeftCorner<2, 2>() = 0.5 * p.squaredNorm() * a * (4.0 * gp * gp.transpose() - 2.0 * hp);
    const Mat2 xp = -2.0 * a * gp * p.transpose();
    h.topRightCorner<2, 2>() = xp;
    h.bottomLeftCorner<2, 2>() = xp.transpose();
    h.bottomRightCorner<2, 2>() = a * Mat2::Identity();
    return h;
  };
  if (beta) {
    s.constant_form = false;
    s.symplectic_matrix = [b = *beta](const Vec& z) {
      Mat m = standard_symplectic(2);
      m.topLeftCorner<2, 2>() = b.value(z.head<2>()) * rot();
      return m;
    };
    s.symplectic_derivative = [b = *beta](const Vec& z, int k) {
      Mat m = Mat::Zero(4, 4);
      if (k < 2) m.topLeftCorner<2, 2>() = b.gradient(z.head<2>())(k) * rot();
      return m;
    };
  }
  s.chart_domain = std::move(domain);
  return s;
}

scalar_field constant_field(double c) {
  return {[c](const Vec2&) { return c; }, [](const Vec2&) { return Vec2::Zero().eval(); },
          [](const Vec2&) { return Mat2::Zero().eval(); }};
}

// -ln y + shift: the half-plane metric scaled to curvature -e^{-2 shift}.
scalar_field half_plane_field(double shift) {
  return {[shift](const Vec2& x) { return -std::log(x(1)) + shift; },
          [](const Vec2& x) { return Vec2(0.0, -1.0 / x(1)); },
          [](const Vec2& x) {
            Mat2 h = Mat2::Zero();
            h(1, 1) = 1.0 / (x(1) * x(1));
            return h;
          }};
}

// ln 2 - ln(1 + |x|^2) + shift: stereographic round metric.
scalar_field sphere_field(double shift) {
  return {[shift](const Vec2& x) { return std::log(2.0) - std::log(1.0 + x.squaredNorm()) + shift; },
          [](const Vec2& x) { return Vec2(-2.0 * x / (1.0 + x.squaredNorm())); },
          [](const Vec2& x) {
            const double q = 1.0 + x.squaredNorm();
            return Mat2(-2.0 / q * Mat2::Identity() + 4.0 / (q * q) * x * x.transpose());
          }};
}

// Half-plane metric times e^{2 eps phi}, phi = exp(-u / sigma^2) with
// u = (x^2 + (y-1)^2) / (2y) a function of the distance to (0, 1).
scalar_field perturbed_field(double eps, double sigma) {
  const double s2 = sigma * sigma;
  auto u_parts = [](const Vec2& x, double& u, Vec2& du, Mat2& ddu) {
    const double y = x(1), q = x(0) * x(0) + 1.0;
    u = q / (2.0 * y) + 0.5 * y - 1.0;
    du << x(0) / y, -q / (2.0 * y * y) + 0.5;
    ddu << 1.0 / y, -x(0) / (y * y), -x(0) / (y * y), q / (y * y * y);
  };
  scalar_field base = half_plane_field(0.0);
  return {[=](const Vec2& x) {
            double u;
            Vec2 du;
            Mat2 ddu;
            u_parts(x, u, du, ddu);
            return base.value(x) + eps * std::exp(-u / s2);
          },
          [=](const Vec2& x) {
            double u;
            Vec2 du;
            Mat2 ddu;
            u_parts(x, u, du, ddu);
            const double phi = std::exp(-u / s2);
            return Vec2(base.gradient(x) - eps * phi / s2 * du);
          },
          [=](const Vec2& x) {
            double u;
            Vec2 du;
            Mat2 ddu;
            u_parts(x, u, du, ddu);
            const double phi = std::exp(-u / s2);
            return Mat2(base.hessian(x) + eps * (phi / (s2 * s2) * du * du.transpose() - phi / s2 * ddu));
          }};
}

// Radial psi with Laplacian kappa (1 - r^2)^4 inside the unit disk and
// harmonic (a flat cone) outside. grad psi = q(r^2) x.
scalar_field bump_field(double kappa) {
  const double a = kappa / 10.0;
  const double psi1 = kappa / 20.0 * (1.0 + 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 4.0 + 1.0 / 5.0);
  auto q = [a](double s) { return s < 1.0 ? a * (5.0 - 10.0 * s + 10.0 * s * s - 5.0 * s * s * s + s * s * s * s) : a / s; };
  auto dq = [a](double s) { return s < 1.0 ? a * (-10.0 + 20.0 * s - 15.0 * s * s + 4.0 * s * s * s) : -a / (s * s); };
  return {[=](const Vec2& x) {
            const double s = x.squaredNorm();
            if (s >= 1.0) return psi1 + 0.5 * a * std::log(s);
            double sum = 0.0, w = 1.0 - s, pw = 1.0;
            for (int j = 0; j < 5; ++j) {
              pw *= w;
              sum += (1.0 - pw) / (j + 1);
            }
            return kappa / 20.0 * sum;
          },
          [=](const Vec2& x) { return Vec2(q(x.squaredNorm()) * x); },
          [=](const Vec2& x) {
            const double s = x.squaredNorm();
            return Mat2(q(s) * Mat2::Identity() + 2.0 * dq(s) * x * x.transpose());
          }};
}

double gauss_curvature_of(const scalar_field& psi, const Vec2& x) {
  return -std::exp(-2.0 * psi.value(x)) * psi.hessian(x).trace();
}

double param(const param_map& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

void check_keys(const std::string& name, const param_map& p, std::set<std::string> allowed) {
  allowed.insert("energy");
  for (const auto& [k, v] : p) {
    if (!allowed.count(k)) fail(error_kind::config, "model " + name + " has no parameter '" + k + "'");
    if (!std::isfinite(v)) fail(error_kind::config, "parameter '" + k + "' is not finite");
  }
}

// Rejection sampler for conformal surface models: position density e^{2 psi}
// (Riemannian area) on a box, direction uniform on the unit circle.
void attach_surface_sampler(model& m, const scalar_field& psi, Vec2 lo, Vec2 hi, bool exact) {
  double peak = 0.0;
  const int k = 64;
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= k; ++j) {
      const Vec2 x(lo(0) + (hi(0) - lo(0)) * i / k, lo(1) + (hi(1) - lo(1)) * j / k);
      peak = std::max(peak, std::exp(2.0 * psi.value(x)));
    }
  peak *= 1.05;
  const double c = m.energy;
  m.point_from = [psi, c, sys = m.system](const Vec& x, double angle) {
    const Vec2 q = x.head<2>();
    const double speed = std::exp(psi.value(q)) * std::sqrt(2.0 * c);
    Vec z(4);
    z << q(0), q(1), speed * std::cos(angle), speed * std::sin(angle);
    return make_point(sys, z);
  };
  m.sample = [psi, lo, hi, peak, from = m.point_from](std::mt19937_64& g) {
    for (;;) {
      const Vec2 x(uniform(g, lo(0), hi(0)), uniform(g, lo(1), hi(1)));
      const double accept = uniform01(g);
      const double angle = uniform(g, 0.0, 2.0 * pi);
      if (accept * peak <= std::exp(2.0 * psi.value(x))) return from(x, angle);
    }
  };
  m.liouville_exact = exact;
}

model surface_model(const std::string& name, const param_map& params, scalar_field psi,
                     std::optional<scalar_field> beta, std::function<bool(const Vec&)> domain, Vec2 lo, Vec2 hi) {
  model m;
  m.name = name;
  m.params = params;
  m.energy = param(params, "energy", 0.5);
  if (!(m.energy > 0.0)) fail(error_kind::config, "energy must be positive");
  m.system = conformal_system(name, psi, beta, std::move(domain));
  m.oracles.gauss_curvature = [psi](const Vec& x) { return gauss_curvature_of(psi, x.head<2>()); };
  attach_surface_sampler(m, psi, lo, hi, true);
  return m;
}

// Isometry z -> (z - x0) / y0 of the half-plane, sending the current point to
// (0, 1). It preserves the metric and b dx^dy / y^2, so the flow is unchanged.
void attach_half_plane_recentering(model& m) {
  m.system.wants_handoff = [](const Vec& z) { return z(1) < 0.05 || z(1) > 20.0 || std::abs(z(0)) > 20.0; };
  m.system.transition = [](const Vec& z, int chart) {
    const double y0 = z(1);
    chart_transition tr;
    tr.coords.resize(4);
    tr.coords << 0.0, 1.0, y0 * z(2), y0 * z(3);
    tr.chart = 1 - chart;
    Vec d(4);
    d << 1.0 / y0, 1.0 / y0, y0, y0;
    tr.jacobian = d.asDiagonal();
    return tr;
  };
}

model one_dof(const std::string& name, const param_map& params, std::function<double(double)> v,
              std::function<double(double)> dv, std::function<double(double)> ddv) {
  model m;
  m.name = name;
  m.params = params;
  m.energy = param(params, "energy", 0.5);
  if (!(m.energy > 0.0)) fail(error_kind::config, "energy must be positive");
  phase_system s;
  s.name = name;
  s.n = 1;
  s.hamiltonian = [v](const Vec& z) { return 0.5 * z(1) * z(1) + v(z(0)); };
  s.gradient = [dv](const Vec& z) { return Vec((Vec(2) << dv(z(0)), z(1)).finished()); };
  s.hessian = [ddv](const Vec& z) { return Mat((Mat(2, 2) << ddv(z(0)), 0.0, 0.0, 1.0).finished()); };
  m.system = s;
  m.chart_description = "global chart (x, p) on T*R";
  const double c = m.energy;
  m.point_from = [v, c, s](const Vec& x, double sign) {
    const double k = 2.0 * (c - v(x(0)));
    if (k < 0.0) fail(error_kind::domain, "configuration not reachable at this energy");
    Vec z(2);
    z << x(0), (sign < 0 ? -1.0 : 1.0) * std::sqrt(k);
    return make_point(s, z);
  };
  return m;
}

}  // namespace

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names = {
      "free_particle", "harmonic_oscillator", "pendulum",      "flat_torus_geodesic", "sphere_geodesic",
      "hyperbolic_plane_geodesic", "perturbed_hyperbolic", "flat_magnetic", "hyperbolic_magnetic",
      "curvature_bump"};
  return names;
}

model instantiate(const std::string& name, const param_map& params) {
  auto everywhere = [](const Vec&) { return true; };
  auto upper_half = [](const Vec& z) { return z(1) > 0.0; };

  if (name == "free_particle") {
    check_keys(name, params, {});
    model m = one_dof(
        name, params, [](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; });
    m.oracles.exact_flow = [](const Vec& z, double t) { return Vec((Vec(2) << z(0) + t * z(1), z(1)).finished()); };
    m.oracles.exact_monodromy = [](const Vec&, double t) { return Mat((Mat(2, 2) << 1, t, 0, 1).finished()); };
    const double speed = std::sqrt(2.0 * m.energy);
    m.sample = [speed, sys = m.system](std::mt19937_64& g) {
      const double x = uniform(g, -1.0, 1.0);
      const double sign = uniform01(g) < 0.5 ? -1.0 : 1.0;
      return make_point(sys, (Vec(2) << x, sign * speed).finished());
    };
    m.liouville_exact = true;
    return m;
  }
  if (name == "harmonic_oscillator") {
    check_keys(name, params, {});
    model m = one_dof(
        name, params, [](double x) { return 0.5 * x * x; }, [](double x) { return x; }, [](double) { return 1.0; });
    m.oracles.exact_flow = [](const Vec& z, double t) {
      return Vec((Vec(2) << z(0) * std::cos(t) + z(1) * std::sin(t), -z(0) * std::sin(t) + z(1) * std::cos(t))
                     .finished());
    };
    m.oracles.exact_monodromy = [](const Vec&, double t) {
      return Mat((Mat(2, 2) << std::cos(t), std::sin(t), -std::sin(t), std::cos(t)).finished());
    };
    const double r = std::sqrt(2.0 * m.energy);
    m.sample = [r, sys = m.system](std::mt19937_64& g) {
      const double th = uniform(g, 0.0, 2.0 * pi);
      return make_point(sys, (Vec(2) << r * std::cos(th), r * std::sin(th)).finished());
    };
    m.liouville_exact = true;
    return m;
  }
  if (name == "pendulum") {
    check_keys(name, params, {"g"});
    const double g0 = param(params, "g", 1.0);
    if (!(g0 > 0.0)) fail(error_kind::config, "pendulum requires g > 0");
    model m = one_dof(
        name, params, [g0](double x) { return g0 * (1.0 - std::cos(x)); },
        [g0](double x) { return g0 * std::sin(x); }, [g0](double x) { return g0 * std::cos(x); });
    if (m.energy >= 2.0 * g0) fail(error_kind::config, "pendulum sampler needs an energy below the separatrix");
    // Time-uniform draw on the libration orbit: x = xm sin u has bounded weight cos u / p(x).
    const double xm = std::acos(1.0 - m.energy / g0);
    auto weight = [xm, g0, c = m.energy](double u) {
      const double x = xm * std::sin(u);
      const double p = std::sqrt(std::max(0.0, 2.0 * (c - g0 * (1.0 - std::cos(x)))));
      return p > 0.0 ? xm * std::cos(u) / p : 0.0;
    };
    double peak = 0.0;
    for (int i = 1; i < 2000; ++i) peak = std::max(peak, weight(-pi / 2 + pi * i / 2000.0));
    peak *= 1.05;
    m.sample = [weight, peak, xm, from = m.point_from](std::mt19937_64& g) {
      for (;;) {
        const double u = uniform(g, -pi / 2, pi / 2);
        const double accept = uniform01(g);
        const double sign = uniform01(g) < 0.5 ? -1.0 : 1.0;
        if (accept * peak <= weight(u)) return from((Vec(1) << xm * std::sin(u)).finished(), sign);
      }
    };
    m.liouville_exact = true;
    return m;
  }
  if (name == "flat_torus_geodesic") {
    check_keys(name, params, {});
    model m = surface_model(name, params, constant_field(0.0), std::nullopt, everywhere, Vec2(0, 0),
                            Vec2(2 * pi, 2 * pi));
    m.chart_description = "universal cover R^2 of the torus R^2 / (2 pi Z)^2";
    m.oracles.reduced_curvature = 0.0;
    m.oracles.exact_flow = [](const Vec& z, double t) {
      Vec out = z;
      out.head<2>() += t * z.tail<2>();
      return out;
    };
    m.oracles.exact_monodromy = [](const Vec&, double t) {
      Mat mm = Mat::Identity(4, 4);
      mm.topRightCorner<2, 2>() = t * Mat2::Identity();
      return mm;
    };
    return m;
  }
  if (name == "sphere_geodesic") {
    check_keys(name, params, {"K"});
    const double k = param(params, "K", 1.0);
    if (!(k > 0.0)) fail(error_kind::config, "sphere_geodesic requires K > 0");
    model m = surface_model(name, params, sphere_field(-0.5 * std::log(k)), std::nullopt, everywhere, Vec2(-1, -1),
                            Vec2(1, 1));
    m.chart_description = "two stereographic charts exchanged by inversion when |x|^2 > 1.5";
    m.system.wants_handoff = [](const Vec& z) { return z.head<2>().squaredNorm() > 1.5; };
    m.system.transition = [](const Vec& z, int chart) {
      const Vec2 x = z.head<2>(), p = z.tail<2>();
      const double r2 = x.squaredNorm();
      const double xp = x.dot(p);
      chart_transition tr;
      tr.coords.resize(4);
      tr.coords.head<2>() = x / r2;
      tr.coords.tail<2>() = r2 * p - 2.0 * xp * x;
      tr.chart = 1 - chart;
      tr.jacobian = Mat::Zero(4, 4);
      tr.jacobian.topLeftCorner<2, 2>() = (Mat2::Identity() - 2.0 * x * x.transpose() / r2) / r2;
      tr.jacobian.bottomLeftCorner<2, 2>() =
          2.0 * p * x.transpose() - 2.0 * xp * Mat2::Identity() - 2.0 * x * p.transpose();
      tr.jacobian.bottomRightCorner<2, 2>() = r2 * Mat2::Identity() - 2.0 * x * x.transpose();
      return tr;
    };
    m.oracles.reduced_curvature = k * 2.0 * m.energy;
    m.oracles.conjugate_spacing = pi / std::sqrt(k * 2.0 * m.energy);
    m.liouville_exact = false;  // box covers part of one chart only
    return m;
  }
  if (name == "hyperbolic_plane_geodesic") {
    check_keys(name, params, {"K"});
    const double k = param(params, "K", -1.0);
    if (!(k < 0.0)) fail(error_kind::config, "hyperbolic_plane_geodesic requires K < 0");
    model m = surface_model(name, params, half_plane_field(-0.5 * std::log(-k)), std::nullopt, upper_half,
                            Vec2(-1, 0.5), Vec2(1, 2));
    m.chart_description = "upper half-plane y > 0, recentered to (0, 1) by an isometry when the point drifts";
    attach_half_plane_recentering(m);
    m.oracles.reduced_curvature = k * 2.0 * m.energy;
    return m;
  }
  if (name == "perturbed_hyperbolic") {
    check_keys(name, params, {"epsilon", "sigma"});
    const double eps = param(params, "epsilon", 0.12), sigma = param(params, "sigma", 1.0);
    if (!(sigma > 0.0)) fail(error_kind::config, "perturbed_hyperbolic requires sigma > 0");
    scalar_field psi = perturbed_field(eps, sigma);
    // The curvature must stay pinched in [-1.5, -0.5]; checked on a sample grid.
    for (int i = 0; i <= 200; ++i)
      for (int j = 0; j <= 200; ++j) {
        const Vec2 x(-8.0 + 16.0 * i / 200.0, std::exp(-5.0 + 10.0 * j / 200.0));
        const double kk = gauss_curvature_of(psi, x);
        if (kk < -1.5 || kk > -0.5) {
          std::ostringstream os;
          os << "perturbed_hyperbolic curvature " << kk << " leaves [-1.5, -0.5]; reduce epsilon";
          fail(error_kind::config, os.str());
        }
      }
    model m = surface_model(name, params, psi, std::nullopt, upper_half, Vec2(-1, 0.5), Vec2(1, 2));
    m.chart_description = "upper half-plane y > 0";
    return m;
  }
  if (name == "flat_magnetic") {
    check_keys(name, params, {"b"});
    const double b = param(params, "b", 1.0);
    if (!(b >= 0.0)) fail(error_kind::config, "flat_magnetic requires b >= 0");
    model m = surface_model(name, params, constant_field(0.0), constant_field(b), everywhere, Vec2(-1, -1),
                            Vec2(1, 1));
    m.system.constant_form = true;
    m.chart_description = "global chart on T*R^2 with form dp^dx + b dx1^dx2";
    // Constant curvature 0 and constant field strength: R~ = 2 c K + b^2.
    m.oracles.reduced_curvature = b * b;
    if (b > 0.0) m.oracles.conjugate_spacing = pi / b;
    if (b > 0.0) {
      m.oracles.exact_flow = [b](const Vec& z, double t) {
        // p rotates with angular velocity -b; x follows the circle.
        const double c = std::cos(b * t), s = std::sin(b * t);
        Vec out(4);
        out(2) = c * z(2) + s * z(3);
        out(3) = -s * z(2) + c * z(3);
        out(0) = z(0) + (s * z(2) + (1.0 - c) * z(3)) / b;
        out(1) = z(1) + (-(1.0 - c) * z(2) + s * z(3)) / b;
        return out;
      };
    }
    return m;
  }
  if (name == "hyperbolic_magnetic") {
    check_keys(name, params, {"b"});
    const double b = param(params, "b", 0.5);
    if (!(b >= 0.0)) fail(error_kind::config, "hyperbolic_magnetic requires b >= 0");
    scalar_field beta{[b](const Vec2& x) { return b / (x(1) * x(1)); },
                      [b](const Vec2& x) { return Vec2(0.0, -2.0 * b / (x(1) * x(1) * x(1))); },
                      [b](const Vec2& x) {
                        Mat2 h = Mat2::Zero();
                        h(1, 1) = 6.0 * b / std::pow(x(1), 4);
                        return h;
                      }};
    model m = surface_model(name, params, half_plane_field(0.0), beta, upper_half, Vec2(-1, 0.5), Vec2(1, 2));
    m.chart_description = "upper half-plane y > 0 with form dp^dx + b dx^dy / y^2, recentered to (0, 1) by an isometry when the point drifts";
    attach_half_plane_recentering(m);
    m.oracles.reduced_curvature = -2.0 * m.energy + b * b;
    return m;
  }
  if (name == "curvature_bump") {
    check_keys(name, params, {"kappa"});
    const double kappa = param(params, "kappa", 2.0);
    if (!(kappa > 0.0)) fail(error_kind::config, "curvature_bump requires kappa > 0");
    model m = surface_model(name, params, bump_field(kappa), std::nullopt, everywhere, Vec2(-3, -3), Vec2(3, 3));
    m.chart_description = "plane with conformal metric: negative curvature inside r < 1, flat cone outside";
    return m;
  }
  fail(error_kind::config, "unknown model '" + name + "'");
}

}  // namespace hamlab
