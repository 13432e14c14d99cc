#pragma once

#include "hamlab/jacobi.hpp"

#include <vector>

namespace hamlab {

// The quotient ker dH / R X at a point, represented by 2n - 2 vectors of
// ker dH that are Euclidean-orthogonal to X.
struct reduced_space {
  phase_point base;
  Mat basis;
  Mat omega;
  Vec field;
  bool trivial = false;

  Vec lift(const Vec& v) const { return basis * v; }
  // Coordinates of w in ker dH modulo X.
  Vec project(const Vec& w) const;
};

reduced_space reduce_space(const phase_system& sys, const phase_point& a);

// Reduced canonical data at a point (gauge fixed by U(0) = I), together with
// the full-space curvature in the adapted frame used by the block formula.
struct reduced_local_frame {
  Vec z;
  int chart = 0;
  int pivot = 0;
  bool trivial = false;  // n = 1
  Mat E, F;              // lifts of the reduced frame at tau = 0 (2n x (n-1))
  Mat R;                 // reduced curvature, direct
  Mat Omega, Omega_dot;  // reduced gauge generator
  double darboux_residual = 0.0;
  double asymmetry = 0.0;

  Mat E_full, F_full;  // adapted full frame; last column is the normal vector
  Mat R_full;
  Vec omega_bar, omega_bar_dot;
  double c = 0.0, c_dot = 0.0, c_ddot = 0.0;
  Mat R_formula;              // R_full block + (3/4) omega_bar omega_bar^T
  double offdiag_mismatch = 0.0;  // R_full off-diagonal vs (c'/c) omega_bar + omega_bar' / 2
  double corner_mismatch = 0.0;   // R_full corner vs |omega_bar|^2 / 4 - c''/c
  double full_darboux_residual = 0.0;
};

// pivot < 0 picks the coordinate with the largest |dH(V e_i)|.
reduced_local_frame reduced_local(const phase_system& sys, const Vec& z, int chart, const jacobi_options& opt = {},
                                  int pivot = -1);

int preferred_pivot(const phase_system& sys, const Vec& z);

struct reduced_formula_report {
  Mat R_direct;
  Mat R_formula;
  double mismatch = 0.0;
  Vec omega_bar;
  double c = 0.0;
  double transversality = 0.0;  // |c|
  double offdiag_mismatch = 0.0;
  double corner_mismatch = 0.0;
};

reduced_formula_report reduced_curvature_via_formula(const phase_system& sys, const phase_point& a,
                                                     const jacobi_options& opt = {});

// <N~ w, w> = <N w, w> + (3/4) omega([X, [X, xi]], w)^2 for w in Lambda and ker dH,
// with w given by coefficients in the adapted orthonormal frame.
struct quadratic_identity_report {
  double reduced = 0.0;            // <N~ w, w>
  double full = 0.0;               // <N w, w>
  double correction_formula = 0.0; // (3/4) (omega_bar . w)^2
  double correction_bracket = 0.0; // (3/4) omega([X,[X,xi]], w)^2
};

quadratic_identity_report quadratic_identity(const phase_system& sys, const phase_point& a, const Vec& w,
                                             const jacobi_options& opt = {});

// Second bracket [X, [X, xi]] of the unit normal field xi of ker dH inside Lambda.
Vec double_bracket_normal(const phase_system& sys, const Vec& z, double step = 2e-3);

struct reduced_frame_result {
  std::vector<double> times;
  std::vector<phase_point> states;
  std::vector<Mat> monodromies;
  std::vector<Mat> E_local, F_local;  // lifts in T_{phi_t(a)}, global gauge
  std::vector<Mat> E, F;              // pulled back to T_a
  std::vector<Mat> curvature;
  std::vector<Vec> omega_bar;
  std::vector<double> c;
  std::vector<Mat> U;
  double max_darboux_residual = 0.0;
  double max_asymmetry = 0.0;
  double min_abs_c = 0.0;
  bool trivial = false;
};

reduced_frame_result reduced_jacobi_frame(const phase_system& sys, const phase_point& a,
                                          const std::vector<double>& grid, const jacobi_options& opt = {},
                                          const flow_options& fopt = {});

// Darboux coordinates (a, b) of w in ker dH (mod X) with respect to a reduced
// frame: w = E a + F b mod X, a = omega(F, w), b = -omega(E, w).
Vec frame_coordinates(const Mat& form, const Mat& E, const Mat& F, const Vec& w);
Mat frame_coordinates(const Mat& form, const Mat& E, const Mat& F, const Mat& w);

}  // namespace hamlab
