#pragma once

// Reference solutions used as oracles. Nothing here calls into the library's
// integrator or frame code.

#include "hamlab/linalg.hpp"

#include <cmath>
#include <functional>

namespace oracle {

using hamlab::Mat;
using hamlab::Vec;

inline constexpr double pi = 3.14159265358979323846;

// Classical fixed-step RK4.
inline Vec rk4(const std::function<Vec(const Vec&)>& f, Vec y, double T, int steps) {
  const double h = T / steps;
  for (int i = 0; i < steps; ++i) {
    const Vec k1 = f(y);
    const Vec k2 = f(y + 0.5 * h * k1);
    const Vec k3 = f(y + 0.5 * h * k2);
    const Vec k4 = f(y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

// Darboux matrix for dp^dx (z = (x, p)) plus b dx1^dx2 on a plane.
inline Mat twisted_plane_form(double b) {
  Mat w = Mat::Zero(4, 4);
  w(0, 2) = -1.0;
  w(1, 3) = -1.0;
  w(2, 0) = 1.0;
  w(3, 1) = 1.0;
  w(0, 1) = b;
  w(1, 0) = -b;
  return w;
}

// X with omega(X, v) = -dH(v), where omega(u, v) = u^T W v: solves W^T X = -grad H.
inline Vec hamiltonian_field(const Mat& w, const Vec& grad) {
  return Eigen::FullPivLU<Mat>(w.transpose()).solve(-grad);
}

// Scalar Riccati S' + S^2 + r = 0 with S(0+) = +infinity.
inline double riccati_singular_start(double r, double t) {
  if (r < 0) {
    const double k = std::sqrt(-r);
    return k / std::tanh(k * t);
  }
  if (r == 0) return 1.0 / t;
  const double k = std::sqrt(r);
  return k / std::tan(k * t);
}

// B'' + r B = 0, B(0) = 0, B'(0) = 1.
inline double jacobi_field(double r, double t) {
  if (r < 0) return std::sinh(std::sqrt(-r) * t) / std::sqrt(-r);
  if (r == 0) return t;
  return std::sin(std::sqrt(r) * t) / std::sqrt(r);
}

// Five-point second derivative of a scalar function.
inline double second_derivative(const std::function<double(double)>& f, double t, double h) {
  return (-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h) - f(t - 2 * h)) / (12 * h * h);
}

// Gauss curvature of g = e^{2 psi} (dx^2 + dy^2) by finite differences of psi.
inline double conformal_gauss_curvature(const std::function<double(double, double)>& psi, double x, double y,
                                        double h = 1e-3) {
  const double pxx = second_derivative([&](double s) { return psi(s, y); }, x, h);
  const double pyy = second_derivative([&](double s) { return psi(x, s); }, y, h);
  return -std::exp(-2.0 * psi(x, y)) * (pxx + pyy);
}

}  // namespace oracle
