#pragma once

#include "hamlab/linalg.hpp"
#include "hamlab/ode.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace hamlab {

// Change of chart applied to a phase point; jacobian maps tangent vectors.
struct chart_transition {
  Vec coords;
  int chart = 0;
  Mat jacobian;
};

// A Hamiltonian system in a coordinate chart with phase point z = (x, p).
// Only the Hamiltonian is mandatory; missing derivatives fall back to
// fourth-order central differences, the form to the standard one, and the
// vertical frame to the momentum directions.
struct phase_system {
  std::string name;
  int n = 0;

  std::function<double(const Vec&)> hamiltonian;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
  std::function<Mat(const Vec&)> symplectic_matrix;
  // derivative of the symplectic matrix along coordinate k; null with a
  // non-null symplectic_matrix means the form is differentiated numerically
  std::function<Mat(const Vec&, int)> symplectic_derivative;
  bool constant_form = true;
  std::function<Mat(const Vec&)> vertical_frame;
  std::function<bool(const Vec&)> chart_domain;

  // Optional chart switching (sphere stereographic pair).
  std::function<bool(const Vec&)> wants_handoff;
  std::function<chart_transition(const Vec&, int)> transition;

  int dim() const { return 2 * n; }
  double H(const Vec& z) const { return hamiltonian(z); }
  Vec dH(const Vec& z) const;
  Mat d2H(const Vec& z) const;
  Mat form(const Vec& z) const;
  Mat dform(const Vec& z, int k) const;
  Mat vertical(const Vec& z) const;
  bool inside(const Vec& z) const { return !chart_domain || chart_domain(z); }

  // X = Omega^{-1} grad H, so that omega(X, .) = -dH.
  Vec field(const Vec& z) const;
  // Jacobian of X in coordinates.
  Mat field_jacobian(const Vec& z) const;
  // Matrix of <v1, v2> = omega([X, V1], V2) on the vertical frame.
  Mat canonical_form(const Vec& z) const;
};

struct phase_point {
  Vec coords;
  double energy = 0.0;
  int chart = 0;
};

phase_point make_point(const phase_system& sys, const Vec& coords, int chart = 0);

struct tangent_vector {
  phase_point base;
  Vec components;
};

tangent_vector hamiltonian_vector_field(const phase_system& sys, const phase_point& a);

struct monotone_form_result {
  Mat matrix;
  bool monotone = false;
  double asymmetry = 0.0;
};

monotone_form_result monotone_form(const phase_system& sys, const phase_point& a);

struct flow_options {
  double rtol = 1e-12;
  double atol = 1e-15;
  double max_step = std::numeric_limits<double>::infinity();
  double node_spacing = 0.05;  // output grid spacing
  bool allow_handoff = true;
};

struct flow_segment {
  phase_point base;
  std::vector<double> times;
  std::vector<phase_point> states;
  std::vector<Mat> monodromies;  // empty until linearized
  double energy_drift = 0.0;
  double symplectic_drift = 0.0;  // normalized by max(1, |M|^2)
  bool truncated = false;
  double exit_time = std::numeric_limits<double>::quiet_NaN();
};

// Uniform grid from 0 to T (T may be negative) with spacing at most `spacing`.
std::vector<double> uniform_grid(double T, double spacing);

flow_segment flow(const phase_system& sys, const phase_point& a, double T, const flow_options& opt = {});
flow_segment flow_on_grid(const phase_system& sys, const phase_point& a, const std::vector<double>& times,
                          bool variational, const flow_options& opt = {});
flow_segment linearized_flow(const phase_system& sys, const flow_segment& seg, const flow_options& opt = {});

// Symplectic residual |M^T Omega(z) M - Omega(a)| / max(1, |M|^2).
double symplectic_residual(const phase_system& sys, const phase_point& a, const phase_point& z, const Mat& m);

// Incremental integration of the flow, optionally with the variational
// equation, following chart transitions and stopping at chart exits.
class trajectory_stepper {
 public:
  trajectory_stepper(const phase_system& sys, const phase_point& start, bool variational,
                     const flow_options& opt = {});

  // Returns false when the chart was left; the state is then the last point
  // inside the chart and exit_time() is set.
  bool advance_to(double t);

  double t() const { return t_; }
  phase_point point() const;
  const Vec& coords() const { return z_; }
  int chart() const { return chart_; }
  const Mat& monodromy() const { return m_; }
  bool exited() const { return exited_; }
  double exit_time() const { return exit_time_; }
  long steps() const { return steps_; }

 private:
  void restart();
  void unpack(const Vec& y);

  const phase_system* sys_;
  bool variational_;
  flow_options opt_;
  std::unique_ptr<ode::dop853> integrator_;
  double t_ = 0.0;
  Vec z_;
  Mat m_;
  int chart_ = 0;
  bool exited_ = false;
  double exit_time_ = std::numeric_limits<double>::quiet_NaN();
  long steps_ = 0;
};

}  // namespace hamlab
