#pragma once

#include "hamlab/linalg.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hamlab {

// Matrix curvature R(t) for B'' + R B = 0 and S' + S^2 + R = 0.
// Optional bounds: R >= -k^2 I, and the pinching -K1^2 I <= R <= -K2^2 I.
struct riccati_problem {
  int m = 1;
  std::function<Mat(double)> curvature;
  std::optional<double> k;
  std::optional<double> K1, K2;

  Mat R(double t) const;  // symmetrized

  // Samples R on [t0, t1] and throws a precondition error if a declared bound fails.
  void verify_bounds(double t0, double t1, double spacing = 0.05) const;

  static riccati_problem constant(const Mat& r);
  static riccati_problem scalar(std::function<double(double)> r);
};

struct riccati_integration {
  double rtol = 1e-12;
  double atol = 1e-14;
  double max_step = 0.25;
};

struct fundamental_solution {
  std::vector<double> times;
  std::vector<Mat> B, Bdot;
  std::vector<Mat> Bddot;  // differentiated dense output, an independent check of the equation
  std::vector<double> det_B;
  std::vector<double> singular_times;  // sign changes of det B and tangencies, refined
  std::optional<double> first_singular_time;  // the one closest to t0 on the forward side
  double wronskian_drift = 0.0;  // relative to |B| |B'|
};

// Integrates from (t0, B0, Bdot0) to every node of a sorted grid containing t0.
fundamental_solution solve_linear(const riccati_problem& p, const Mat& B0, const Mat& Bdot0,
                                  const std::vector<double>& grid, double t0 = 0.0,
                                  const riccati_integration& opt = {});

struct riccati_solution {
  std::vector<double> times;
  std::vector<Mat> S;
  double residual = 0.0;
  double asymmetry = 0.0;
};

// S = B' B^{-1} at every node except t0 when B(t0) = 0.
riccati_solution riccati_from_fundamental(const riccati_problem& p, const fundamental_solution& fund);

// Direct integration of S' = -S^2 - R from S(t0) = S0 over a sorted grid containing t0.
riccati_solution solve_riccati(const riccati_problem& p, const Mat& S0, const std::vector<double>& grid,
                               double t0 = 0.0, const riccati_integration& opt = {});

struct two_point_solution {
  double s = 0.0;
  std::vector<double> times;
  std::vector<Mat> D, Ddot, U, M;  // U and M are empty matrices where undefined
  double boundary_residual = 0.0;  // D(s,0) = I, D(s,s) = 0, D'(s,s) = -B(s)^{-T}
  double asymmetry = 0.0;
};

two_point_solution two_point(const riccati_problem& p, double s, const std::vector<double>& grid,
                             const riccati_integration& opt = {});

enum class limit_direction { plus, minus };

// U(s, t_i) for every node of the limit grid.
using horizon_source = std::function<std::vector<Mat>(double s)>;

struct limit_options {
  double tol = 1e-8;
  double first_horizon = 10.0;
  double max_horizon = 640.0;
  double monotone_slack = 1e-7;
};

struct limit_solution {
  limit_direction direction = limit_direction::plus;
  std::vector<double> times;
  std::vector<Mat> U;
  std::vector<Mat> D;  // D(t) with D(0) = I and D' = U D, when the source provides it
  std::vector<double> horizons;
  std::vector<double> gaps;
  double convergence_gap = 0.0;
  bool converged = false;
  double monotone_violation = 0.0;
  std::optional<double> bound_violation;     // eigenvalue slack of -K2 >= U+ >= -K1 (or mirrored)
  std::optional<double> envelope_violation;  // relative slack of the exponential envelope
};

// Doubling horizons until two successive gaps fall below tol. A monotonicity
// violation throws an inconsistency error; running out of horizons returns
// converged = false.
limit_solution limit_from_source(const horizon_source& source, limit_direction dir,
                                 const std::vector<double>& grid, const limit_options& opt = {});

// Limit of the two-point solutions of p on a sorted grid containing 0.
limit_solution limit_riccati(const riccati_problem& p, limit_direction dir, const std::vector<double>& grid,
                             const limit_options& opt = {}, const riccati_integration& iopt = {});

// U(s, t_i) of p by integrating the linear equation from t = s towards the
// grid, renormalizing the Lagrangian frame on the way. Also fills D when asked.
std::vector<Mat> two_point_U(const riccati_problem& p, double s, const std::vector<double>& grid,
                             std::vector<Mat>* D = nullptr, const riccati_integration& opt = {});

struct comparison_report {
  bool accepted = true;  // false: the preconditions failed and nothing was checked
  std::string reason;
  std::vector<double> times;
  std::vector<double> min_eig;  // of S2 - S1 forward, S1 - S2 backward
  double worst = 0.0;
};

// Grid sorted, starting at t0 for the forward check and ending at t0 for the backward one.
comparison_report comparison_check(const riccati_problem& p1, const riccati_problem& p2, const Mat& S1_0,
                                   const Mat& S2_0, const std::vector<double>& grid, bool backward = false,
                                   const riccati_integration& opt = {});

struct blowup_report {
  bool reached = false;
  double T = 0.0;
  double achieved = 0.0;  // min singular value of B at the last node
};

blowup_report blowup_certificate(const fundamental_solution& fund, double K);

}  // namespace hamlab
