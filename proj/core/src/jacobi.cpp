#include "hamlab/jacobi.hpp"

#include "hamlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hamlab {

namespace {

Mat antisym(const Mat& a) { return 0.5 * (a - a.transpose()); }

// A with A^T G A = I from the Cholesky factor in fixed coordinate order.
Mat orthonormalizer(const Mat& g) {
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) fail(error_kind::regularity, "canonical form is not positive definite");
  const Mat l = llt.matrixL();
  return l.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(g.rows(), g.cols()));
}

phase_point raw_point(const phase_system& sys, const Vec& z, int chart) { return phase_point{z, sys.H(z), chart}; }

flow_options stencil_flow_options(const jacobi_options& opt) {
  flow_options f;
  f.rtol = opt.rtol;
  f.atol = opt.atol;
  f.allow_handoff = false;
  return f;
}

// Cubic Hermite interpolation of a matrix on [t0, t1].
Mat hermite(double t, double t0, double t1, const Mat& y0, const Mat& d0, const Mat& y1, const Mat& d1) {
  const double dt = t1 - t0;
  const double s = (t - t0) / dt;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * dt * d0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * dt * d1;
}

}  // namespace

kernel_result curve_kernel(const Mat& form, const std::array<Mat, 5>& e, double h) {
  const Mat& eb = e[2];
  const Mat ed = (e[0] - 8.0 * e[1] + 8.0 * e[3] - e[4]) / (12.0 * h);
  const Mat edd = (-e[0] + 16.0 * e[1] - 30.0 * e[2] + 16.0 * e[3] - e[4]) / (12.0 * h * h);
  const long m = eb.cols();
  kernel_result out;
  out.Omega = antisym(ed.transpose() * form * ed);
  out.Omega_dot = antisym(edd.transpose() * form * ed + ed.transpose() * form * edd);
  const Mat& om = out.Omega;
  // Second derivative of the canonical frame E = Ebar U^T at U(0) = I.
  const Mat ecan_dd = edd + ed * om.transpose() + eb * (0.25 * om * om + 0.5 * out.Omega_dot).transpose();
  out.E = eb;
  out.F = ed + 0.5 * eb * om.transpose();
  const Mat r = -(out.F.transpose() * form * ecan_dd).transpose();
  out.asymmetry = m ? asymmetry(r) : 0.0;
  out.R = sym(r);
  const Mat id = Mat::Identity(m, m);
  out.darboux_residual = std::max({max_abs(eb.transpose() * form * eb), max_abs(out.F.transpose() * form * eb - id),
                                   max_abs(out.F.transpose() * form * out.F)});
  out.structural_residual = max_abs(ecan_dd + eb * out.R.transpose()) / std::max(1.0, max_abs(ecan_dd));
  return out;
}

stencil_data jacobi_stencil(const phase_system& sys, const Vec& z, const jacobi_options& opt) {
  const double h = opt.stencil;
  const flow_options fo = stencil_flow_options(opt);
  const phase_point start = raw_point(sys, z, 0);
  const Mat form0 = sys.form(z);
  stencil_data s;
  s.points[2] = z;
  s.monodromies[2] = Mat::Identity(sys.dim(), sys.dim());
  const int order[2][2] = {{3, 4}, {1, 0}};
  const double sign[2] = {1.0, -1.0};
  for (int side = 0; side < 2; ++side) {
    trajectory_stepper st(sys, start, true, fo);
    for (int j = 0; j < 2; ++j) {
      if (!st.advance_to(sign[side] * h * (j + 1)))
        fail(error_kind::domain, "stencil flow leaves the chart; use a smaller stencil");
      s.points[order[side][j]] = st.coords();
      s.monodromies[order[side][j]] = st.monodromy();
    }
  }
  for (int i = 0; i < 5; ++i) {
    const Vec& zi = s.points[i];
    s.W[i] = symplectic_inverse(s.monodromies[i], form0, sys.form(zi)) * sys.vertical(zi);
    s.G[i] = sym(sys.canonical_form(zi));
  }
  return s;
}

local_frame local_canonical_frame(const phase_system& sys, const Vec& z, int chart, const jacobi_options& opt) {
  stencil_data s = jacobi_stencil(sys, z, opt);
  const bool mixed = opt.basis_mixing.size() > 0;
  std::array<Mat, 5> e;
  local_frame lf;
  lf.z = z;
  lf.chart = chart;
  for (int i = 0; i < 5; ++i) {
    Mat w = s.W[i], g = s.G[i];
    if (mixed) {
      w = w * opt.basis_mixing;
      g = opt.basis_mixing.transpose() * g * opt.basis_mixing;
    }
    const Mat a = orthonormalizer(g);
    e[i] = w * a;
    if (i == 2) {
      lf.V = mixed ? Mat(sys.vertical(z) * opt.basis_mixing) : sys.vertical(z);
      lf.G = g;
      lf.A = a;
    }
  }
  lf.k = curve_kernel(sys.form(z), e, opt.stencil);
  return lf;
}

jacobi_curve_sample jacobi_curve(const phase_system& sys, const phase_point& a, const std::vector<double>& grid,
                                 const flow_options& fopt) {
  flow_segment seg = flow_on_grid(sys, a, grid, true, fopt);
  if (seg.truncated) fail(error_kind::domain, "trajectory leaves the chart inside the requested grid");
  jacobi_curve_sample c;
  c.base = a;
  c.times = seg.times;
  c.states = seg.states;
  c.monodromies = seg.monodromies;
  const Mat form0 = sys.form(a.coords);
  for (std::size_t i = 0; i < seg.times.size(); ++i) {
    const Vec& zi = seg.states[i].coords;
    c.frames.push_back(symplectic_inverse(seg.monodromies[i], form0, sys.form(zi)) * sys.vertical(zi));
    Mat g = sym(sys.canonical_form(zi));
    if (numerically_singular(g)) {
      std::ostringstream os;
      os << "Jacobi curve is not regular at t=" << seg.times[i];
      fail(error_kind::regularity, os.str());
    }
    c.gram.push_back(g);
  }
  return c;
}

std::vector<Mat> integrate_gauge(const std::vector<double>& times, const std::vector<gauge_node>& nodes,
                                 int reorthogonalize_every) {
  const auto zero = std::find(times.begin(), times.end(), 0.0);
  if (zero == times.end()) fail(error_kind::precondition, "gauge grid must contain t = 0");
  const long i0 = zero - times.begin();
  const long count = static_cast<long>(times.size());
  const long m = nodes[i0].Omega.rows();
  std::vector<Mat> u(times.size());
  u[i0] = Mat::Identity(m, m);
  if (m <= 1) {
    // One-dimensional gauge: only sign changes at jumps.
    for (long k = i0 + 1; k < count; ++k) u[k] = nodes[k].jump ? Mat(u[k - 1] * nodes[k].O) : u[k - 1];
    for (long k = i0 - 1; k >= 0; --k) u[k] = nodes[k].jump ? Mat(u[k + 1] * nodes[k].O) : u[k + 1];
    return u;
  }
  ode::options o;
  o.rtol = 1e-12;
  o.atol = 1e-15;
  for (int dir : {1, -1}) {
    int since = 0;
    for (long k = i0 + dir; k >= 0 && k < count; k += dir) {
      const long p = k - dir;
      const Mat& w0 = nodes[p].Omega;
      const Mat& d0 = nodes[p].Omega_dot;
      const Mat& w1 = nodes[k].jump ? nodes[k].Omega_prev : nodes[k].Omega;
      const Mat& d1 = nodes[k].jump ? nodes[k].Omega_dot_prev : nodes[k].Omega_dot;
      const double t0 = times[p], t1 = times[k];
      ode::dop853 integ(
          [&](double t, const Vec& y, Vec& dy) {
            const Mat om = hermite(t, t0, t1, w0, d0, w1, d1);
            dy = flatten(0.5 * unflatten(y, 0, m, m) * om);
          },
          o);
      integ.reset(t0, flatten(u[p]));
      integ.advance_to(t1);
      Mat uk = unflatten(integ.y(), 0, m, m);
      if (++since >= reorthogonalize_every) {
        uk = polar_orthogonalize(uk);
        since = 0;
      }
      if (nodes[k].jump) uk = uk * nodes[k].O;
      u[k] = uk;
    }
  }
  return u;
}

canonical_frame_result canonical_frame(const phase_system& sys, const jacobi_curve_sample& curve,
                                       const jacobi_options& opt) {
  const auto& times = curve.times;
  if (!std::is_sorted(times.begin(), times.end()))
    fail(error_kind::precondition, "canonical frame needs an ascending grid");
  const auto zero = std::find(times.begin(), times.end(), 0.0);
  if (zero == times.end()) fail(error_kind::precondition, "canonical frame grid must contain t = 0");
  const long i0 = zero - times.begin();
  const std::size_t count = times.size();
  std::vector<local_frame> local(count);
  std::vector<gauge_node> nodes(count);
  for (std::size_t k = 0; k < count; ++k) {
    const phase_point& st = curve.states[k];
    local[k] = local_canonical_frame(sys, st.coords, st.chart, opt);
    nodes[k].Omega = local[k].k.Omega;
    nodes[k].Omega_dot = local[k].k.Omega_dot;
  }
  // Chart changes: express the generator at the new node in the previous
  // chart's gauge and record the change of orthonormal basis.
  for (std::size_t k = 0; k < count; ++k) {
    if (static_cast<long>(k) == i0) continue;
    const std::size_t p = static_cast<long>(k) > i0 ? k - 1 : k + 1;
    if (curve.states[k].chart == curve.states[p].chart) continue;
    const chart_transition back = sys.transition(curve.states[k].coords, curve.states[k].chart);
    const local_frame alt = local_canonical_frame(sys, back.coords, back.chart, opt);
    const chart_transition fwd = sys.transition(back.coords, back.chart);
    const Mat mapped = fwd.jacobian * alt.k.E;
    nodes[k].jump = true;
    nodes[k].Omega_prev = alt.k.Omega;
    nodes[k].Omega_dot_prev = alt.k.Omega_dot;
    nodes[k].O = polar_orthogonalize(mapped.colPivHouseholderQr().solve(local[k].k.E));
  }
  canonical_frame_result out;
  out.times = times;
  out.U = integrate_gauge(times, nodes, opt.reorthogonalize_every);
  out.frame_gauge = opt.basis_mixing.size() ? "cholesky-mixed-basis" : "cholesky-fixed-order";
  const Mat form0 = sys.form(curve.base.coords);
  for (std::size_t k = 0; k < count; ++k) {
    const Mat& u = out.U[k];
    const kernel_result& kr = local[k].k;
    out.E_local.push_back(kr.E * u.transpose());
    out.F_local.push_back(kr.F * u.transpose());
    const Mat minv = symplectic_inverse(curve.monodromies[k], form0, sys.form(curve.states[k].coords));
    out.E.push_back(minv * out.E_local.back());
    out.F.push_back(minv * out.F_local.back());
    out.curvature.push_back(sym(u * kr.R * u.transpose()));
    out.Omega.push_back(kr.Omega);
    const double orth = max_abs(u.transpose() * u - Mat::Identity(u.rows(), u.cols()));
    out.darboux_residual.push_back(std::max(kr.darboux_residual, orth));
    out.asymmetry.push_back(kr.asymmetry);
    out.max_darboux_residual = std::max(out.max_darboux_residual, out.darboux_residual.back());
    out.max_asymmetry = std::max(out.max_asymmetry, kr.asymmetry);
  }
  if (out.max_darboux_residual > 1e-6) {
    std::ostringstream os;
    os << "Darboux residual " << out.max_darboux_residual << " of the canonical frame; refine the stencil";
    fail(error_kind::accuracy, os.str());
  }
  return out;
}

namespace {

Mat bracket_curvature(const phase_system& sys, const Vec& z, int chart, const jacobi_options& opt,
                      const local_frame& lf, double& asym) {
  const int n = sys.n;
  const Mat v0 = sys.vertical(z);
  const Vec x = sys.field(z);
  const double delta = opt.stencil / std::max(x.norm(), 1e-12);
  // Y = [X, V]^h for the coordinate-constant extension of the vertical basis.
  auto y_at = [&](const Vec& zz, const Mat* f_known) {
    Mat f = f_known ? *f_known : local_canonical_frame(sys, zz, chart, opt).k.F;
    Mat t(sys.dim(), 2 * n);
    t << sys.vertical(zz), f;
    const Mat coeff = t.fullPivLu().solve(-sys.field_jacobian(zz) * v0);
    return Mat(f * coeff.bottomRows(n));
  };
  const Mat y0 = y_at(z, &lf.k.F);
  Mat dy = Mat::Zero(sys.dim(), n);
  const double w[4] = {1.0, -8.0, 8.0, -1.0};
  const double s[4] = {-2.0, -1.0, 1.0, 2.0};
  for (int i = 0; i < 4; ++i) dy += w[i] * y_at(z + s[i] * delta * x, nullptr);
  dy /= 12.0 * delta;
  const Mat br = dy - sys.field_jacobian(z) * y0;
  Mat t(sys.dim(), 2 * n);
  t << v0, lf.k.F;
  const Mat n_v = -t.fullPivLu().solve(br).topRows(n);
  // Vertical basis -> orthonormal e-basis (E = V A), then row convention.
  const Mat b = opt.basis_mixing.size() ? Mat(opt.basis_mixing * lf.A) : lf.A;
  const Mat r = (b.inverse() * n_v * b).transpose();
  asym = asymmetry(r);
  return sym(r);
}

}  // namespace

curvature_result curvature_operator(const phase_system& sys, const phase_point& a, curvature_method method,
                                    const jacobi_options& opt) {
  if (!sys.inside(a.coords)) fail(error_kind::domain, "point outside the chart domain");
  curvature_result out;
  out.frame = local_canonical_frame(sys, a.coords, a.chart, opt);
  if (method == curvature_method::frame) {
    out.R = out.frame.k.R;
    out.asymmetry = out.frame.k.asymmetry;
  } else {
    out.R = bracket_curvature(sys, a.coords, a.chart, opt, out.frame, out.asymmetry);
  }
  if (out.asymmetry > 1e-5 * std::max(1.0, max_abs(out.R))) {
    std::ostringstream os;
    os << "curvature asymmetry " << out.asymmetry << " above 1e-5";
    fail(error_kind::accuracy, os.str());
  }
  return out;
}

splitting_result splitting(const phase_system& sys, const phase_point& a, const jacobi_options& opt) {
  const local_frame lf = local_canonical_frame(sys, a.coords, a.chart, opt);
  const int n = sys.n, d = sys.dim();
  splitting_result s;
  s.base = a;
  s.vertical = sys.vertical(a.coords);
  s.horizontal = lf.k.F;
  Mat t(d, d);
  t << s.vertical, s.horizontal;
  Eigen::JacobiSVD<Mat> svd(t);
  const auto sv = svd.singularValues();
  s.condition = sv(0) / sv(sv.size() - 1);
  if (!(s.condition < 1e8)) fail(error_kind::structural, "vertical and horizontal spaces are nearly dependent");
  const Mat tinv = t.inverse();
  Mat pv = Mat::Zero(d, d), ph = Mat::Zero(d, d);
  pv.leftCols(n) = s.vertical;
  ph.rightCols(n) = s.horizontal;
  s.projector_v = pv * tinv;
  s.projector_h = ph * tinv;
  return s;
}

Mat curvature_along(const phase_system& sys, const phase_point& a, double t, const jacobi_options& opt) {
  const double h = opt.stencil;
  flow_options fo = stencil_flow_options(opt);
  fo.allow_handoff = true;
  trajectory_stepper st(sys, a, true, fo);
  const Mat form0 = sys.form(a.coords);
  std::array<Mat, 5> e;
  for (int i = 0; i < 5; ++i) {
    if (!st.advance_to(t + (i - 2) * h)) fail(error_kind::domain, "trajectory leaves the chart");
    const Vec& zi = st.coords();
    const Mat w = symplectic_inverse(st.monodromy(), form0, sys.form(zi)) * sys.vertical(zi);
    e[i] = w * orthonormalizer(sym(sys.canonical_form(zi)));
  }
  return curve_kernel(form0, e, h).R;
}

equivariance_report equivariance_check(const phase_system& sys, const phase_point& a, double s, double t,
                                       const jacobi_options& opt) {
  flow_options fo;
  fo.rtol = opt.rtol;
  fo.atol = opt.atol;
  const Mat form_a = sys.form(a.coords);
  trajectory_stepper to_t(sys, a, true, fo);
  if (!to_t.advance_to(t)) fail(error_kind::domain, "trajectory leaves the chart");
  const Mat j_at = symplectic_inverse(to_t.monodromy(), form_a, sys.form(to_t.coords())) * sys.vertical(to_t.coords());
  trajectory_stepper to_s(sys, a, true, fo);
  if (!to_s.advance_to(s)) fail(error_kind::domain, "trajectory leaves the chart");
  const phase_point b = to_s.point();
  const Mat pushed = to_s.monodromy() * j_at;
  trajectory_stepper from_b(sys, b, true, fo);
  if (!from_b.advance_to(t - s)) fail(error_kind::domain, "trajectory leaves the chart");
  const Mat j_b = symplectic_inverse(from_b.monodromy(), sys.form(b.coords), sys.form(from_b.coords())) *
                  sys.vertical(from_b.coords());
  equivariance_report r;
  r.max_angle = largest_principal_angle(pushed, j_b);
  const Eigen::SelfAdjointEigenSolver<Mat> e1(curvature_along(sys, a, t, opt));
  const Eigen::SelfAdjointEigenSolver<Mat> e2(curvature_along(sys, b, t - s, opt));
  r.curvature_spectrum_gap = (e1.eigenvalues() - e2.eigenvalues()).cwiseAbs().maxCoeff();
  return r;
}

}  // namespace hamlab
