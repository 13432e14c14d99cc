#include "hamlab/reduction.hpp"

#include "hamlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hamlab {

namespace {

Mat orthonormalizer(const Mat& g) {
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) fail(error_kind::regularity, "canonical form is not positive definite");
  const Mat l = llt.matrixL();
  return l.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(g.rows(), g.cols()));
}

double fd1(const std::array<double, 5>& f, double h) { return (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h); }
double fd2(const std::array<double, 5>& f, double h) {
  return (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h);
}

// Unit normal (for the canonical form) of ker dH inside Lambda, as a vector.
Vec normal_field(const phase_system& sys, const Vec& z) {
  const Mat v = sys.vertical(z);
  const Vec r = v.transpose() * sys.dH(z);
  const Mat g = sym(sys.canonical_form(z));
  const Vec a = g.ldlt().solve(r);
  const double q = r.dot(a);
  if (!(q > 0.0)) fail(error_kind::transversality, "X is tangent to the vertical space");
  return v * (a / std::sqrt(q));
}

// Lie derivative along X of a vector field given by f, by central differences
// along straight segments in the direction X.
template <class F>
Vec bracket_with_field(const phase_system& sys, const Vec& z, const F& f, double step) {
  const Vec x = sys.field(z);
  const double d = step / std::max(x.norm(), 1e-12);
  const Vec df = (f(Vec(z - 2 * d * x)) - 8.0 * f(Vec(z - d * x)) + 8.0 * f(Vec(z + d * x)) - f(Vec(z + 2 * d * x))) /
                 (12.0 * d);
  return df - sys.field_jacobian(z) * f(z);
}

}  // namespace

Vec reduced_space::project(const Vec& w) const {
  Mat a(basis.rows(), basis.cols() + 1);
  a << basis, field;
  const Vec c = a.colPivHouseholderQr().solve(w);
  return c.head(basis.cols());
}

reduced_space reduce_space(const phase_system& sys, const phase_point& a) {
  reduced_space rs;
  rs.base = a;
  const int d = sys.dim();
  rs.field = sys.field(a.coords);
  if (sys.n == 1) {
    rs.trivial = true;
    rs.basis = Mat::Zero(d, 0);
    rs.omega = Mat::Zero(0, 0);
    return rs;
  }
  const Vec g = sys.dH(a.coords);
  if (g.norm() < 1e-12) fail(error_kind::transversality, "critical point of H: dH = 0");
  const Mat v = sys.vertical(a.coords);
  if ((v.transpose() * g).norm() < 1e-12 * g.norm())
    fail(error_kind::transversality, "X is not transversal to the vertical space");
  Mat c(2, d);
  c.row(0) = g.transpose();
  c.row(1) = rs.field.transpose();
  Eigen::JacobiSVD<Mat> svd(c, Eigen::ComputeFullV);
  rs.basis = svd.matrixV().rightCols(d - 2);
  rs.omega = rs.basis.transpose() * sys.form(a.coords) * rs.basis;
  if (std::abs(rs.omega.determinant()) < 1e-12) fail(error_kind::structural, "reduced form is degenerate");
  return rs;
}

int preferred_pivot(const phase_system& sys, const Vec& z) {
  const Vec r = sys.vertical(z).transpose() * sys.dH(z);
  Eigen::Index i;
  r.cwiseAbs().maxCoeff(&i);
  return static_cast<int>(i);
}

reduced_local_frame reduced_local(const phase_system& sys, const Vec& z, int chart, const jacobi_options& opt,
                                  int pivot) {
  reduced_local_frame out;
  out.z = z;
  out.chart = chart;
  const int n = sys.n, m = n - 1;
  if (m == 0) {
    out.trivial = true;
    out.E = out.F = Mat::Zero(sys.dim(), 0);
    out.R = out.Omega = out.Omega_dot = out.R_formula = Mat::Zero(0, 0);
    return out;
  }
  const stencil_data s = jacobi_stencil(sys, z, opt);
  const Vec grad = sys.dH(z);
  const Vec x = sys.field(z);
  const Mat form = sys.form(z);
  const double h = opt.stencil;
  if (pivot < 0) pivot = preferred_pivot(sys, z);
  out.pivot = pivot;

  std::array<Mat, 5> first, adapted;
  std::array<Vec, 5> normal;
  std::array<double, 5> c;
  for (int i = 0; i < 5; ++i) {
    const Mat& w = s.W[i];
    const Mat& g = s.G[i];
    const Vec rho = w.transpose() * grad;
    const Vec an = g.ldlt().solve(rho);
    const double q = rho.dot(an);
    if (!(q > 0.0)) fail(error_kind::transversality, "X is tangent to the Jacobi curve");
    normal[i] = w * (an / std::sqrt(q));
    const Mat nb = null_basis_of_row(rho, pivot);
    first[i] = w * (nb * orthonormalizer(nb.transpose() * g * nb));
    c[i] = omega(form, x, normal[i]);
  }
  const kernel_result red = curve_kernel(form, first, h);
  out.E = red.E;
  out.F = red.F;
  out.R = red.R;
  out.Omega = red.Omega;
  out.Omega_dot = red.Omega_dot;
  out.darboux_residual = red.darboux_residual;
  out.asymmetry = red.asymmetry;

  for (int i = 0; i < 5; ++i) {
    Mat f = first[i];
    if (m >= 2) {
      // Second-order Taylor gauge making the first block canonical at tau = 0.
      const double tau = (i - 2) * h;
      const Mat u = Mat::Identity(m, m) + 0.5 * tau * red.Omega +
                    0.5 * tau * tau * (0.25 * red.Omega * red.Omega + 0.5 * red.Omega_dot);
      f = f * u.transpose();
    }
    adapted[i].resize(sys.dim(), n);
    adapted[i] << f, normal[i];
  }
  const kernel_result full = curve_kernel(form, adapted, h);
  out.E_full = full.E;
  out.F_full = full.F;
  out.R_full = full.R;
  out.full_darboux_residual = full.darboux_residual;
  out.omega_bar = full.Omega.row(m).head(m).transpose();
  out.omega_bar_dot = full.Omega_dot.row(m).head(m).transpose();
  out.c = c[2];
  out.c_dot = fd1(c, h);
  out.c_ddot = fd2(c, h);
  if (std::abs(out.c) < 1e-10) fail(error_kind::transversality, "c = omega(X, e_n) vanishes");
  out.R_formula = out.R_full.topLeftCorner(m, m) + 0.75 * out.omega_bar * out.omega_bar.transpose();
  const Vec off_pred = (out.c_dot / out.c) * out.omega_bar + 0.5 * out.omega_bar_dot;
  out.offdiag_mismatch = (out.R_full.col(m).head(m) - off_pred).cwiseAbs().maxCoeff();
  const double corner_pred = 0.25 * out.omega_bar.squaredNorm() - out.c_ddot / out.c;
  out.corner_mismatch = std::abs(out.R_full(m, m) - corner_pred);
  return out;
}

reduced_formula_report reduced_curvature_via_formula(const phase_system& sys, const phase_point& a,
                                                     const jacobi_options& opt) {
  const reduced_local_frame r = reduced_local(sys, a.coords, a.chart, opt);
  reduced_formula_report rep;
  rep.R_direct = r.R;
  rep.R_formula = r.R_formula;
  rep.mismatch = max_abs(r.R - r.R_formula);
  rep.omega_bar = r.omega_bar;
  rep.c = r.c;
  rep.transversality = std::abs(r.c);
  rep.offdiag_mismatch = r.offdiag_mismatch;
  rep.corner_mismatch = r.corner_mismatch;
  return rep;
}

Vec double_bracket_normal(const phase_system& sys, const Vec& z, double step) {
  auto xi = [&](const Vec& y) { return normal_field(sys, y); };
  auto inner = [&](const Vec& y) { return bracket_with_field(sys, y, xi, step); };
  return bracket_with_field(sys, z, inner, step);
}

quadratic_identity_report quadratic_identity(const phase_system& sys, const phase_point& a, const Vec& w,
                                             const jacobi_options& opt) {
  const reduced_local_frame r = reduced_local(sys, a.coords, a.chart, opt);
  if (r.trivial) return {};
  const int m = sys.n - 1;
  if (w.size() != m) fail(error_kind::structural, "w must have n - 1 coefficients");
  quadratic_identity_report q;
  q.reduced = w.dot(r.R * w);
  q.full = w.dot(r.R_full.topLeftCorner(m, m) * w);
  q.correction_formula = 0.75 * std::pow(r.omega_bar.dot(w), 2);
  const Vec wv = r.E_full.leftCols(m) * w;
  q.correction_bracket = 0.75 * std::pow(omega(sys.form(a.coords), double_bracket_normal(sys, a.coords), wv), 2);
  return q;
}

Vec frame_coordinates(const Mat& form, const Mat& E, const Mat& F, const Vec& w) {
  Vec out(E.cols() + F.cols());
  out.head(F.cols()) = F.transpose() * form * w;
  out.tail(E.cols()) = -E.transpose() * form * w;
  return out;
}

Mat frame_coordinates(const Mat& form, const Mat& E, const Mat& F, const Mat& w) {
  Mat out(E.cols() + F.cols(), w.cols());
  out.topRows(F.cols()) = F.transpose() * form * w;
  out.bottomRows(E.cols()) = -E.transpose() * form * w;
  return out;
}

reduced_frame_result reduced_jacobi_frame(const phase_system& sys, const phase_point& a,
                                          const std::vector<double>& grid, const jacobi_options& opt,
                                          const flow_options& fopt) {
  reduced_frame_result out;
  if (!std::is_sorted(grid.begin(), grid.end())) fail(error_kind::precondition, "reduced frame needs an ascending grid");
  flow_segment seg = flow_on_grid(sys, a, grid, true, fopt);
  if (seg.truncated) fail(error_kind::domain, "trajectory leaves the chart inside the requested grid");
  out.times = seg.times;
  out.states = seg.states;
  out.monodromies = seg.monodromies;
  const std::size_t count = seg.times.size();
  const long i0 = std::find(seg.times.begin(), seg.times.end(), 0.0) - seg.times.begin();
  if (sys.n == 1) {
    out.trivial = true;
    for (std::size_t k = 0; k < count; ++k) {
      out.curvature.push_back(Mat::Zero(0, 0));
      out.E_local.push_back(Mat::Zero(sys.dim(), 0));
      out.F_local.push_back(Mat::Zero(sys.dim(), 0));
      out.E.push_back(Mat::Zero(sys.dim(), 0));
      out.F.push_back(Mat::Zero(sys.dim(), 0));
      out.omega_bar.push_back(Vec());
      out.c.push_back(0.0);
      out.U.push_back(Mat::Zero(0, 0));
    }
    return out;
  }
  std::vector<reduced_local_frame> local(count);
  std::vector<gauge_node> nodes(count);
  auto degenerate = [&](const Vec& z, int pivot) {
    const Vec r = sys.vertical(z).transpose() * sys.dH(z);
    return std::abs(r(pivot)) < 0.3 * r.cwiseAbs().maxCoeff();
  };
  local[i0] = reduced_local(sys, seg.states[i0].coords, seg.states[i0].chart, opt);
  for (int dir : {1, -1}) {
    for (long k = i0 + dir; k >= 0 && k < static_cast<long>(count); k += dir) {
      const long p = k - dir;
      const phase_point& st = seg.states[k];
      int pivot = local[p].pivot;
      if (degenerate(st.coords, pivot)) pivot = preferred_pivot(sys, st.coords);
      local[k] = reduced_local(sys, st.coords, st.chart, opt, pivot);
      const bool chart_jump = st.chart != seg.states[p].chart;
      if (chart_jump || pivot != local[p].pivot) {
        Vec zb = st.coords;
        int cb = st.chart;
        Mat jac = Mat::Identity(sys.dim(), sys.dim());
        if (chart_jump) {
          const chart_transition back = sys.transition(st.coords, st.chart);
          zb = back.coords;
          cb = back.chart;
          jac = sys.transition(zb, cb).jacobian;
        }
        const reduced_local_frame alt = reduced_local(sys, zb, cb, opt, local[p].pivot);
        nodes[k].jump = true;
        nodes[k].Omega_prev = alt.Omega;
        nodes[k].Omega_dot_prev = alt.Omega_dot;
        nodes[k].O = polar_orthogonalize(Mat(jac * alt.E).colPivHouseholderQr().solve(local[k].E));
      }
    }
  }
  for (std::size_t k = 0; k < count; ++k) {
    nodes[k].Omega = local[k].Omega;
    nodes[k].Omega_dot = local[k].Omega_dot;
  }
  out.U = integrate_gauge(out.times, nodes, opt.reorthogonalize_every);
  const Mat form0 = sys.form(a.coords);
  out.min_abs_c = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < count; ++k) {
    const Mat& u = out.U[k];
    out.E_local.push_back(local[k].E * u.transpose());
    out.F_local.push_back(local[k].F * u.transpose());
    const Mat minv = symplectic_inverse(seg.monodromies[k], form0, sys.form(seg.states[k].coords));
    out.E.push_back(minv * out.E_local.back());
    out.F.push_back(minv * out.F_local.back());
    out.curvature.push_back(sym(u * local[k].R * u.transpose()));
    out.omega_bar.push_back(local[k].omega_bar);
    out.c.push_back(local[k].c);
    out.min_abs_c = std::min(out.min_abs_c, std::abs(local[k].c));
    const double orth = max_abs(u.transpose() * u - Mat::Identity(u.rows(), u.cols()));
    out.max_darboux_residual = std::max({out.max_darboux_residual, local[k].darboux_residual, orth});
    out.max_asymmetry = std::max(out.max_asymmetry, local[k].asymmetry);
  }
  return out;
}

}  // namespace hamlab
