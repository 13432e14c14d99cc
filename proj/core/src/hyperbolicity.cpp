#include "hamlab/hyperbolicity.hpp"

#include "hamlab/error.hpp"
#include "hamlab/parallel.hpp"

#include <boost/math/interpolators/makima.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace hamlab {

namespace {

std::vector<double> spaced_grid(double t0, double t1, double spacing) {
  const double lo = std::min(t0, 0.0), hi = std::max(t1, 0.0);
  const long a = static_cast<long>(std::floor(lo / spacing + 1e-9));
  const long b = static_cast<long>(std::ceil(hi / spacing - 1e-9));
  std::vector<double> g;
  for (long i = a; i <= b; ++i) g.push_back(i == 0 ? 0.0 : i * spacing);
  return g;
}

// Entrywise modified Akima interpolation of a matrix series.
class matrix_series {
 public:
  matrix_series(const std::vector<double>& t, const std::vector<Mat>& values) : lo_(t.front()), hi_(t.back()) {
    rows_ = values.front().rows();
    cols_ = values.front().cols();
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = 0; j < cols_; ++j) {
        std::vector<double> x = t, y;
        for (const Mat& v : values) y.push_back(v(i, j));
        entries_.push_back(std::make_shared<spline>(std::move(x), std::move(y)));
      }
  }
  Mat operator()(double t) const {
    t = std::clamp(t, lo_, hi_);
    Mat out(rows_, cols_);
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = 0; j < cols_; ++j) out(i, j) = (*entries_[i * cols_ + j])(t);
    return out;
  }

 private:
  using spline = boost::math::interpolators::makima<std::vector<double>>;
  double lo_, hi_;
  Eigen::Index rows_ = 0, cols_ = 0;
  std::vector<std::shared_ptr<spline>> entries_;
};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

Mat stacked(const Mat& a, const Mat& b) {
  Mat s(a.rows() + b.rows(), a.cols());
  s << a, b;
  return s;
}

// Least-squares slope of y against x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// Dimension of the intersection of two column spans, by principal angles.
int intersection_dim(const Mat& a, const Mat& b, double angle) {
  int k = 0;
  for (double t : principal_angles(a, b))
    if (t < angle) ++k;
  return k;
}

}  // namespace

const char* to_string(anosov_status s) noexcept {
  switch (s) {
    case anosov_status::anosov: return "anosov";
    case anosov_status::not_anosov: return "not_anosov";
    case anosov_status::inconclusive: return "inconclusive";
  }
  return "?";
}

Mat reduced_coordinates(const phase_system& sys, const Vec& z, const Mat& E, const Mat& F, const Mat& w) {
  return frame_coordinates(sys.form(z), E, F, w);
}

riccati_problem curvature_problem(const phase_system& sys, const phase_point& a, double t0, double t1, bool reduced,
                                  const hyperbolicity_options& opt) {
  const std::vector<double> grid = spaced_grid(t0, t1, opt.curvature_spacing);
  std::vector<Mat> series;
  if (reduced) {
    series = reduced_jacobi_frame(sys, a, grid, opt.jacobi, opt.flow).curvature;
  } else {
    series = canonical_frame(sys, jacobi_curve(sys, a, grid, opt.flow), opt.jacobi).curvature;
  }
  riccati_problem p;
  p.m = static_cast<int>(series.front().rows());
  if (p.m == 0) {
    p.curvature = [](double) { return Mat::Zero(0, 0); };
    return p;
  }
  auto f = std::make_shared<matrix_series>(grid, series);
  p.curvature = [f](double t) { return (*f)(t); };
  return p;
}

conjugate_report conjugate_scan(const phase_system& sys, const phase_point& a, double T, bool reduced,
                                const hyperbolicity_options& opt) {
  if (!(T > 0.0)) fail(error_kind::precondition, "conjugate scan needs T > 0");
  conjugate_report rep;
  rep.base = a;
  rep.horizon = T;
  rep.reduced = reduced;
  rep.method = reduced ? "det B on the reduced Jacobi curve" : "det B on the full Jacobi curve";
  const riccati_problem p = curvature_problem(sys, a, 0.0, T, reduced, opt);
  if (p.m == 0) return rep;
  const Mat I = Mat::Identity(p.m, p.m), Z = Mat::Zero(p.m, p.m);
  const fundamental_solution f = solve_linear(p, Z, I, spaced_grid(0.0, T, opt.curvature_spacing));
  for (double t : f.singular_times) {
    if (t <= 1e-9 || t > T) continue;
    conjugate_point c;
    c.time = t;
    const fundamental_solution at = solve_linear(p, Z, I, {0.0, t - 1e-3, t, std::min(t + 1e-3, T + 1e-3)});
    const Mat q = orthonormal_basis(stacked(at.B[2], at.Bdot[2]));
    Eigen::JacobiSVD<Mat> svd(q.topRows(p.m));
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) < 1e-6) ++c.multiplicity;
    c.multiplicity = std::max(c.multiplicity, 1);
    c.degenerate = (at.det_B[1] > 0) == (at.det_B[3] > 0);
    rep.points.push_back(c);
  }
  return rep;
}

jacobi_limit_source::jacobi_limit_source(const phase_system& sys, const phase_point& a,
                                         const reduced_local_frame& frame, const flow_options& fopt)
    : sys_(&sys), base_(a), E_(frame.E), F_(frame.F), form_(sys.form(a.coords)), fopt_(fopt) {}

std::vector<Mat> jacobi_limit_source::operator()(double s) {
  auto& st = s > 0 ? forward_ : backward_;
  if (!st) st.emplace(*sys_, base_, true, fopt_);
  if (!st->advance_to(s))
    fail(error_kind::domain, "trajectory leaves the chart at t = " + fmt(st->exit_time()) + " before the horizon");
  const Vec& z = st->coords();
  const Mat w = symplectic_inverse(st->monodromy(), form_, sys_->form(z)) * sys_->vertical(z);
  const Vec rho = w.transpose() * sys_->dH(base_.coords);
  Eigen::Index pivot;
  rho.cwiseAbs().maxCoeff(&pivot);
  const Mat y = w * null_basis_of_row(rho, static_cast<int>(pivot));
  const Mat c = frame_coordinates(form_, E_, F_, y);
  const Eigen::Index m = E_.cols();
  const Mat q = orthonormal_basis(c);
  Eigen::JacobiSVD<Mat> svd(q.bottomRows(m));
  if (q.cols() < m || svd.singularValues().minCoeff() < 1e-9)
    fail(error_kind::conjugate_point, "conjugate point before the horizon " + fmt(s));
  const Mat a = q.topRows(m), b = q.bottomRows(m);
  return {sym(-b.transpose().partialPivLu().solve(a.transpose()).transpose())};
}

invariant_distribution build_invariant_distribution(const phase_system& sys, const phase_point& a, int sign,
                                                    const hyperbolicity_options& opt) {
  invariant_distribution d;
  d.base = a;
  d.sign = sign >= 0 ? 1 : -1;
  const reduced_local_frame rl = reduced_local(sys, a.coords, a.chart, opt.jacobi);
  const Vec x = sys.field(a.coords);
  const int m = sys.n - 1;
  d.E = rl.E;
  d.F = rl.F;
  if (m == 0) {
    d.U = Mat::Zero(0, 0);
    d.reduced_basis = Mat::Zero(sys.dim(), 0);
    d.lifted_basis = x;
    d.converged = true;
    d.lambda_angle = M_PI / 2;
    return d;
  }
  jacobi_limit_source source(sys, a, rl, opt.flow);
  limit_options lo;
  lo.tol = opt.limit_tol;
  lo.first_horizon = opt.first_horizon;
  lo.max_horizon = opt.max_horizon;
  try {
    const limit_solution lim = limit_from_source(
        [&](double s) { return source(s); }, d.sign > 0 ? limit_direction::plus : limit_direction::minus, {0.0}, lo);
    d.converged = lim.converged;
    d.limit_gap = lim.convergence_gap;
    d.horizons = lim.horizons;
    d.construction_horizon = lim.horizons.empty() ? 0.0 : lim.horizons.back();
    d.U = lim.U.empty() ? Mat::Zero(m, m) : lim.U.front();
  } catch (const hamlab_error& e) {
    if (e.kind() != error_kind::domain) throw;
    d.converged = false;
    d.limit_gap = std::numeric_limits<double>::infinity();
    d.U = Mat::Zero(m, m);
  }
  d.reduced_basis = d.F - d.E * d.U;
  d.lifted_basis.resize(sys.dim(), m + 1);
  d.lifted_basis << d.reduced_basis, x;
  const Mat form = sys.form(a.coords);
  d.isotropy_residual = max_abs(d.lifted_basis.transpose() * form * d.lifted_basis);
  const Vec g = sys.dH(a.coords);
  for (Eigen::Index j = 0; j < d.lifted_basis.cols(); ++j)
    d.dH_residual = std::max(d.dH_residual, std::abs(g.dot(d.lifted_basis.col(j))) / (g.norm() * d.lifted_basis.col(j).norm()));
  const Vec coef = d.lifted_basis.colPivHouseholderQr().solve(x);
  d.field_residual = (d.lifted_basis * coef - x).norm() / x.norm();
  const Mat c = frame_coordinates(form, d.E, d.F, d.reduced_basis);
  const Mat ce = frame_coordinates(form, d.E, d.F, d.E);
  d.lambda_angle = smallest_principal_angle(c, ce);
  return d;
}

std::vector<double> invariance_residuals(const phase_system& sys, const invariant_distribution& dist,
                                         const std::vector<double>& s_values, const hyperbolicity_options& opt) {
  std::vector<double> out;
  for (double s : s_values) {
    if (s == 0.0) {
      out.push_back(0.0);
      continue;
    }
    trajectory_stepper st(sys, dist.base, true, opt.flow);
    if (!st.advance_to(s)) fail(error_kind::domain, "trajectory leaves the chart before s = " + fmt(s));
    const phase_point b = st.point();
    const invariant_distribution there = build_invariant_distribution(sys, b, dist.sign, opt);
    const Mat pushed = st.monodromy() * dist.reduced_basis;
    const Mat c1 = reduced_coordinates(sys, b.coords, there.E, there.F, pushed);
    const Mat c2 = reduced_coordinates(sys, b.coords, there.E, there.F, there.reduced_basis);
    out.push_back(largest_principal_angle(c1, c2));
  }
  return out;
}

namespace {

struct rate_fit {
  double rate = std::numeric_limits<double>::infinity();  // smallest over the basis
  double c1 = 0.0;
  double horizontal_sup = 0.0;  // of the pushed F~ columns
};

// Norms of d~phi_t applied to the columns of w (frame metric at phi_t(a)) on
// [0, T] (dir = +1) or [-T, 0] (dir = -1).
rate_fit fit_rates(const phase_system& sys, const phase_point& a, const Mat& w, const Mat& Fa, int dir, double T,
                   const hyperbolicity_options& opt) {
  const double dt = 0.1;
  const int steps = static_cast<int>(std::ceil(T / dt));
  trajectory_stepper st(sys, a, true, opt.flow);
  std::vector<double> tt;
  std::vector<std::vector<double>> logs(w.cols());
  rate_fit out;
  const Eigen::Index m = w.cols();
  std::vector<double> base_norm(m);
  {
    const reduced_local_frame rl = reduced_local(sys, a.coords, a.chart, opt.jacobi);
    const Mat c = reduced_coordinates(sys, a.coords, rl.E, rl.F, w);
    for (Eigen::Index j = 0; j < m; ++j) base_norm[j] = c.col(j).norm();
  }
  for (int k = 0; k <= steps; ++k) {
    const double t = dir * k * dt;
    if (k > 0 && !st.advance_to(t)) fail(error_kind::domain, "trajectory leaves the chart during the rate fit");
    const phase_point b = st.point();
    const reduced_local_frame rl = reduced_local(sys, b.coords, b.chart, opt.jacobi);
    const Mat c = reduced_coordinates(sys, b.coords, rl.E, rl.F, st.monodromy() * w);
    const Mat h = reduced_coordinates(sys, b.coords, rl.E, rl.F, st.monodromy() * Fa);
    out.horizontal_sup = std::max(out.horizontal_sup, h.bottomRows(m).colwise().norm().maxCoeff());
    tt.push_back(k * dt);
    for (Eigen::Index j = 0; j < m; ++j) logs[j].push_back(std::log(c.col(j).norm() / base_norm[j]));
  }
  const std::size_t half = tt.size() / 2;
  const std::vector<double> x(tt.begin() + half, tt.end());
  for (Eigen::Index j = 0; j < m; ++j) {
    const std::vector<double> y(logs[j].begin() + half, logs[j].end());
    const double rate = -ols_slope(x, y);
    out.rate = std::min(out.rate, rate);
  }
  for (Eigen::Index j = 0; j < m; ++j)
    for (std::size_t k = 0; k < tt.size(); ++k) out.c1 = std::max(out.c1, std::exp(logs[j][k] + out.rate * tt[k]));
  return out;
}

anosov_sample diagnose_sample(const phase_system& sys, anosov_sample s, double T_fit,
                              const hyperbolicity_options& opt) {
  const invariant_distribution dp = build_invariant_distribution(sys, s.base, +1, opt);
  const invariant_distribution dm = build_invariant_distribution(sys, s.base, -1, opt);
  s.converged = dp.converged && dm.converged;
  const Mat cp = reduced_coordinates(sys, s.base.coords, dp.E, dp.F, dp.reduced_basis);
  const Mat cm = reduced_coordinates(sys, s.base.coords, dp.E, dp.F, dm.reduced_basis);
  s.splitting_angle = smallest_principal_angle(cp, cm);
  s.intersection_dim = intersection_dim(dp.lifted_basis, dm.lifted_basis, opt.transversality_angle);
  const rate_fit fp = fit_rates(sys, s.base, dp.reduced_basis, dp.F, +1, T_fit, opt);
  const rate_fit fm = fit_rates(sys, s.base, dm.reduced_basis, dp.F, -1, T_fit, opt);
  s.rate_plus = fp.rate;
  s.rate_minus = fm.rate;
  s.c1 = std::max(fp.c1, fm.c1);
  s.bounded_horizontal = std::max(fp.horizontal_sup, fm.horizontal_sup);
  s.transversal = s.splitting_angle > opt.transversality_angle;
  s.intersection_ok = s.intersection_dim == 1;
  s.rates_ok = std::min(s.rate_plus, s.rate_minus) > opt.rate_margin;
  return s;
}

}  // namespace

anosov_verdict anosov_diagnose(const phase_system& sys, const std::vector<phase_point>& samples, double T_fit,
                               const hyperbolicity_options& opt) {
  anosov_verdict v;
  v.criteria_used = {"splitting transversality", "lifted intersection equals span X", "exponential rates"};
  v.note = "criteria evaluated pointwise, compactness hypothesis not checked";
  if (sys.n < 2) {
    v.status = anosov_status::inconclusive;
    v.note = "one degree of freedom: the reduced space is trivial";
    return v;
  }
  v.samples = parallel_map<anosov_sample>(samples.size(), [&](std::size_t i) {
    anosov_sample s;
    s.base = samples[i];
    try {
      return diagnose_sample(sys, s, T_fit, opt);
    } catch (const hamlab_error& e) {
      // conjugate points or a non-monotone limit: no splitting at this point
      if (e.kind() != error_kind::conjugate_point && e.kind() != error_kind::inconsistency &&
          e.kind() != error_kind::domain)
        throw;
      s.converged = false;
      s.failure = e.what();
      return s;
    }
  });
  int yes = 0, no = 0;
  v.c2 = std::numeric_limits<double>::infinity();
  v.min_splitting_angle = std::numeric_limits<double>::infinity();
  double bounded = 0.0;
  for (const anosov_sample& s : v.samples) {
    if (!s.failure.empty()) continue;
    const int passed = int(s.transversal) + int(s.intersection_ok) + int(s.rates_ok);
    if (s.converged && passed == 3) ++yes;
    if (s.converged && passed == 0) ++no;
    v.c2 = std::min({v.c2, s.rate_plus, s.rate_minus});
    v.c1 = std::max(v.c1, s.c1);
    v.min_splitting_angle = std::min(v.min_splitting_angle, s.splitting_angle);
    bounded = std::max(bounded, s.bounded_horizontal);
  }
  if (!std::isfinite(v.c2)) v.c2 = 0.0;
  if (!std::isfinite(v.min_splitting_angle)) v.min_splitting_angle = 0.0;
  const int total = static_cast<int>(v.samples.size());
  if (total > 0 && yes == total) {
    v.status = anosov_status::anosov;
  } else if (total > 0 && no == total) {
    v.status = anosov_status::not_anosov;
    v.witness = "Delta+ and Delta- meet (smallest angle " + fmt(v.min_splitting_angle) +
                " rad); horizontal part of d~phi_t(f~) stays below " + fmt(bounded) + " on [-" + fmt(T_fit) + ", " +
                fmt(T_fit) + "]";
  } else {
    v.status = anosov_status::inconclusive;
  }
  return v;
}

nonpositive_report nonpositive_criterion(const phase_system& sys, const phase_point& a, double T,
                                         const hyperbolicity_options& opt) {
  nonpositive_report rep;
  if (sys.n < 2) fail(error_kind::precondition, "the criterion needs n >= 2");
  const std::vector<double> grid = spaced_grid(-T, T, opt.curvature_spacing);
  const reduced_frame_result fr = reduced_jacobi_frame(sys, a, grid, opt.jacobi, opt.flow);
  const std::size_t i0 = std::find(fr.times.begin(), fr.times.end(), 0.0) - fr.times.begin();
  const Mat form = sys.form(a.coords);
  const Mat& e0 = fr.E[i0];
  const Mat& f0 = fr.F[i0];
  rep.max_curvature = -std::numeric_limits<double>::infinity();
  rep.min_curvature = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < fr.times.size(); ++k) {
    const double lo = min_eigenvalue(fr.curvature[k]), hi = max_eigenvalue(fr.curvature[k]);
    rep.max_curvature = std::max(rep.max_curvature, hi);
    rep.min_curvature = std::min(rep.min_curvature, lo);
    if (lo < -opt.negative_threshold && (!rep.negative_time || std::abs(fr.times[k]) < std::abs(*rep.negative_time)))
      rep.negative_time = fr.times[k];
  }
  rep.hypothesis_violated = rep.max_curvature > opt.positive_slack;
  rep.fires = rep.negative_time.has_value();
  // Intersection of the derivative curves J~o(t), tracked in frame coordinates at a.
  Mat k = orthonormal_basis(frame_coordinates(form, e0, f0, f0));
  for (std::size_t j = 0; j < fr.times.size(); ++j) {
    const Mat p = orthonormal_basis(frame_coordinates(form, e0, f0, fr.F[j]));
    rep.drift_angle = std::max(rep.drift_angle, largest_principal_angle(frame_coordinates(form, e0, f0, f0), p));
    if (k.cols() == 0) continue;
    Eigen::JacobiSVD<Mat> svd(k.transpose() * p, Eigen::ComputeThinU);
    const double c = std::cos(opt.transversality_angle);
    Eigen::Index keep = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > c) ++keep;
    k = k * svd.matrixU().leftCols(keep);
  }
  rep.intersection_dim = static_cast<int>(k.cols());
  if (rep.hypothesis_violated) {
    rep.status = anosov_status::inconclusive;
  } else if (rep.fires && rep.intersection_dim == 0) {
    rep.status = anosov_status::anosov;
  } else if (!rep.fires && rep.intersection_dim > 0) {
    rep.status = anosov_status::not_anosov;
  } else {
    rep.status = anosov_status::inconclusive;
  }
  return rep;
}

growth_profile horizontal_growth_profile(const phase_system& sys, const phase_point& a, const Vec& w, double T,
                                         const hyperbolicity_options& opt) {
  growth_profile prof;
  const int m = sys.n - 1;
  if (w.size() != 2 * m) fail(error_kind::structural, "w~ needs 2(n-1) frame coordinates");
  const std::vector<double> grid = spaced_grid(0.0, T, opt.curvature_spacing);
  const reduced_frame_result fr = reduced_jacobi_frame(sys, a, grid, opt.jacobi, opt.flow);
  const Mat form = sys.form(a.coords);
  const Vec v = fr.E[0] * w.head(m) + fr.F[0] * w.tail(m);
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < fr.times.size(); ++k) {
    const Vec c = frame_coordinates(form, fr.E[k], fr.F[k], v);
    prof.times.push_back(fr.times[k]);
    prof.norms.push_back(c.tail(m).norm());
    hi = std::max(hi, max_eigenvalue(fr.curvature[k]));
  }
  prof.hypothesis_violated = hi > opt.positive_slack;
  prof.monotone = true;
  for (std::size_t k = 1; k < prof.norms.size(); ++k)
    if (prof.norms[k] < prof.norms[k - 1] - 1e-9 * std::max(1.0, prof.norms[k - 1])) prof.monotone = false;
  return prof;
}

}  // namespace hamlab
