#pragma once

#include "hamlab/jacobi.hpp"
#include "hamlab/reduction.hpp"
#include "hamlab/riccati.hpp"
#include "hamlab/symplectic.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hamlab {

struct hyperbolicity_options {
  jacobi_options jacobi;
  flow_options flow;
  double curvature_spacing = 0.05;     // sampling of the curvature series
  double transversality_angle = 1e-3;  // radians
  double limit_tol = 1e-6;
  double first_horizon = 10.0;
  double max_horizon = 10.0 * 1048576.0;
  double negative_threshold = 1e-6;  // curvature below -threshold fires the criterion
  double positive_slack = 1e-6;      // curvature above this violates R <= 0
  double rate_margin = 0.05;         // fitted rates must exceed this to count as contraction
};

struct conjugate_point {
  double time = 0.0;
  int multiplicity = 0;
  bool degenerate = false;  // even multiplicity, det B does not change sign
};

struct conjugate_report {
  phase_point base;
  double horizon = 0.0;
  bool reduced = true;
  std::vector<conjugate_point> points;
  std::string method;
};

// Zeros of det B for B'' + R(t) B = 0 along the trajectory, R being the
// (reduced or full) curvature series interpolated with modified Akima splines.
conjugate_report conjugate_scan(const phase_system& sys, const phase_point& a, double T, bool reduced = true,
                                const hyperbolicity_options& opt = {});

// Curvature series as a Riccati problem on [t0, t1].
riccati_problem curvature_problem(const phase_system& sys, const phase_point& a, double t0, double t1, bool reduced,
                                  const hyperbolicity_options& opt = {});

// U(s, 0) of the reduced Jacobi curve, computed by flowing to time s and
// writing J~_a(s) in the reduced canonical frame at a. Keeps one stepper per
// direction so that growing horizons reuse the computed trajectory.
class jacobi_limit_source {
 public:
  jacobi_limit_source(const phase_system& sys, const phase_point& a, const reduced_local_frame& frame,
                      const flow_options& fopt);
  std::vector<Mat> operator()(double s);

 private:
  const phase_system* sys_;
  phase_point base_;
  Mat E_, F_, form_;
  flow_options fopt_;
  std::optional<trajectory_stepper> forward_, backward_;
};

struct invariant_distribution {
  phase_point base;
  int sign = 1;  // +1 for the limit s -> +infinity
  Mat E, F;      // reduced canonical frame at the base, lifted (2n x (n-1))
  Mat U;         // U+(0) or U-(0)
  Mat reduced_basis;  // F - E U, lifted
  Mat lifted_basis;   // reduced basis plus X
  bool converged = false;
  double limit_gap = 0.0;
  double construction_horizon = 0.0;
  std::vector<double> horizons;
  double lambda_angle = 0.0;  // smallest principal angle to the vertical, frame metric
  double isotropy_residual = 0.0;
  double dH_residual = 0.0;
  double field_residual = 0.0;  // distance of X from the lifted span
};

invariant_distribution build_invariant_distribution(const phase_system& sys, const phase_point& a, int sign,
                                                    const hyperbolicity_options& opt = {});

// Principal angles (frame metric at phi_s(a)) between the pushed-forward
// distribution and the one built at phi_s(a), for every s.
std::vector<double> invariance_residuals(const phase_system& sys, const invariant_distribution& dist,
                                         const std::vector<double>& s_values, const hyperbolicity_options& opt = {});

// Coordinates of w in the frame metric of the reduced canonical frame.
Mat reduced_coordinates(const phase_system& sys, const Vec& z, const Mat& E, const Mat& F, const Mat& w);

enum class anosov_status { anosov, not_anosov, inconclusive };
const char* to_string(anosov_status s) noexcept;

struct anosov_sample {
  phase_point base;
  bool converged = false;
  double splitting_angle = 0.0;  // smallest principal angle between the reduced distributions
  int intersection_dim = 0;      // of the lifted distributions
  double rate_plus = 0.0;        // fitted c2 along Delta+ forward
  double rate_minus = 0.0;       // along Delta- backward
  double c1 = 0.0;
  double bounded_horizontal = 0.0;  // sup |d~phi_t(f~)^h| over the window
  bool transversal = false, intersection_ok = false, rates_ok = false;
  std::string failure;  // why no splitting was built, if so
};

struct anosov_verdict {
  anosov_status status = anosov_status::inconclusive;
  std::vector<anosov_sample> samples;
  double c2 = 0.0;  // smallest fitted rate
  double c1 = 0.0;
  double min_splitting_angle = 0.0;
  std::vector<std::string> criteria_used;
  std::string witness;
  std::string note;
};

anosov_verdict anosov_diagnose(const phase_system& sys, const std::vector<phase_point>& samples, double T_fit = 8.0,
                               const hyperbolicity_options& opt = {});

struct nonpositive_report {
  bool hypothesis_violated = false;
  double max_curvature = 0.0;
  bool fires = false;
  std::optional<double> negative_time;
  double min_curvature = 0.0;
  int intersection_dim = 0;  // of the intersection of J~o(t) over the window
  double drift_angle = 0.0;
  anosov_status status = anosov_status::inconclusive;
};

nonpositive_report nonpositive_criterion(const phase_system& sys, const phase_point& a, double T,
                                         const hyperbolicity_options& opt = {});

struct growth_profile {
  std::vector<double> times;
  std::vector<double> norms;
  bool hypothesis_violated = false;  // curvature above zero along the window
  bool monotone = false;
};

// |d~phi_t(w~)^h| for w~ = E~ x + F~ y given in frame coordinates (x, y).
growth_profile horizontal_growth_profile(const phase_system& sys, const phase_point& a, const Vec& w, double T,
                                         const hyperbolicity_options& opt = {});

}  // namespace hamlab
