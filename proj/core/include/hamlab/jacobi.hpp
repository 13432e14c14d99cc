#pragma once

#include "hamlab/symplectic.hpp"

#include <array>
#include <string>
#include <vector>

namespace hamlab {

struct jacobi_options {
  double stencil = 0.0025;  // step of the five-point time differences
  double rtol = 1e-13;
  double atol = 1e-16;
  // Optional invertible n x n matrix applied to the vertical basis before the
  // orthonormalization; changes the gauge, never the geometry.
  Mat basis_mixing;
  int reorthogonalize_every = 50;
};

// Canonical-frame data of a regular curve from five samples of an orthonormal
// (with respect to the canonical form) frame at tau = -2h, ..., 2h.
struct kernel_result {
  Mat E;          // frame at tau = 0
  Mat F;          // derivative frame at tau = 0 in the gauge U(0) = I
  Mat Omega;      // omega(e_i', e_j')
  Mat Omega_dot;  // its time derivative
  Mat R;          // curvature, symmetrized
  double asymmetry = 0.0;
  double darboux_residual = 0.0;
  double structural_residual = 0.0;  // part of e'' outside span E
};

kernel_result curve_kernel(const Mat& form, const std::array<Mat, 5>& frames, double h);

// Five-point stencil of the Jacobi curve of a point, in T_z.
struct stencil_data {
  std::array<Mat, 5> W;  // bases of J_z(tau)
  std::array<Mat, 5> G;  // canonical form on those bases
  std::array<Vec, 5> points;
  std::array<Mat, 5> monodromies;
};

stencil_data jacobi_stencil(const phase_system& sys, const Vec& z, const jacobi_options& opt);

// Canonical frame of J_z at tau = 0 with the gauge fixed by U(0) = I.
struct local_frame {
  Vec z;
  int chart = 0;
  Mat V;        // vertical basis
  Mat G;        // canonical form on V
  Mat A;        // E = V A with A^T G A = I
  kernel_result k;
};

local_frame local_canonical_frame(const phase_system& sys, const Vec& z, int chart, const jacobi_options& opt = {});

struct jacobi_curve_sample {
  phase_point base;
  std::vector<double> times;
  std::vector<Mat> frames;  // J_a(t) = dphi_t^{-1} Lambda, as 2n x n bases in T_a
  std::vector<Mat> gram;    // canonical form on those bases
  std::vector<phase_point> states;
  std::vector<Mat> monodromies;
};

jacobi_curve_sample jacobi_curve(const phase_system& sys, const phase_point& a, const std::vector<double>& grid,
                                 const flow_options& fopt = {});

struct canonical_frame_result {
  std::vector<double> times;
  std::vector<Mat> E;  // pulled back to T_a
  std::vector<Mat> F;
  std::vector<Mat> E_local;  // the same frame in T_{phi_t(a)}
  std::vector<Mat> F_local;
  std::vector<Mat> curvature;
  std::vector<Mat> Omega;
  std::vector<Mat> U;
  std::vector<double> darboux_residual;
  std::vector<double> asymmetry;
  double max_darboux_residual = 0.0;
  double max_asymmetry = 0.0;
  std::string frame_gauge;
};

// Canonical frame along a Jacobi curve sample. The grid must contain t = 0.
canonical_frame_result canonical_frame(const phase_system& sys, const jacobi_curve_sample& curve,
                                       const jacobi_options& opt = {});

enum class curvature_method { frame, bracket };

struct curvature_result {
  Mat R;                 // in the e-basis of the local canonical frame
  double asymmetry = 0.0;
  local_frame frame;
};

curvature_result curvature_operator(const phase_system& sys, const phase_point& a, curvature_method method,
                                    const jacobi_options& opt = {});

struct splitting_result {
  phase_point base;
  Mat vertical;
  Mat horizontal;
  Mat projector_v;
  Mat projector_h;
  double condition = 0.0;
};

splitting_result splitting(const phase_system& sys, const phase_point& a, const jacobi_options& opt = {});

struct equivariance_report {
  double max_angle = 0.0;               // subspace mismatch, radians
  double curvature_spectrum_gap = 0.0;  // eigenvalues of R_a(t) vs R_{phi_s a}(t - s)
};

equivariance_report equivariance_check(const phase_system& sys, const phase_point& a, double s, double t,
                                       const jacobi_options& opt = {});

// Curvature of the pulled-back curve J_a at time t, computed from flows
// started at a (used for the conjugation identity).
Mat curvature_along(const phase_system& sys, const phase_point& a, double t, const jacobi_options& opt = {});

// Gauge path: integrates U' = U Omega / 2 on an ascending grid through the
// node with t = 0. `jump` marks nodes where the local gauge differs from the
// one of the neighbour closer to 0; there Omega_prev/Omega_dot_prev give the
// generator in the neighbour's gauge and O the change of basis.
struct gauge_node {
  Mat Omega, Omega_dot;
  bool jump = false;
  Mat Omega_prev, Omega_dot_prev, O;
};

std::vector<Mat> integrate_gauge(const std::vector<double>& times, const std::vector<gauge_node>& nodes,
                                 int reorthogonalize_every);

}  // namespace hamlab
