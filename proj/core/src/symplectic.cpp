#include "hamlab/symplectic.hpp"

#include "hamlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hamlab {

namespace {

double fd_step(double x) { return std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(x)); }

// Fourth-order central difference of a vector-valued map along coordinate k.
template <class F>
auto central_difference(const F& f, const Vec& z, int k) {
  const double h = fd_step(z(k));
  Vec zp = z;
  auto at = [&](double s) {
    zp(k) = z(k) + s * h;
    return f(zp);
  };
  auto fm2 = at(-2), fm1 = at(-1), fp1 = at(1), fp2 = at(2);
  return decltype(fp1)((fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h));
}

}  // namespace

Vec phase_system::dH(const Vec& z) const {
  if (gradient) return gradient(z);
  Vec g(z.size());
  for (int k = 0; k < z.size(); ++k) {
    const double h = fd_step(z(k));
    Vec zp = z;
    auto at = [&](double s) {
      zp(k) = z(k) + s * h;
      return hamiltonian(zp);
    };
    g(k) = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
  }
  return g;
}

Mat phase_system::d2H(const Vec& z) const {
  if (hessian) return hessian(z);
  Mat h(z.size(), z.size());
  auto g = [this](const Vec& y) { return dH(y); };
  for (int k = 0; k < z.size(); ++k) h.col(k) = central_difference(g, z, k);
  return sym(h);
}

Mat phase_system::form(const Vec& z) const {
  if (symplectic_matrix) return symplectic_matrix(z);
  return standard_symplectic(n);
}

Mat phase_system::dform(const Vec& z, int k) const {
  if (constant_form || !symplectic_matrix) return Mat::Zero(dim(), dim());
  if (symplectic_derivative) return symplectic_derivative(z, k);
  auto f = [this](const Vec& y) { return Mat(symplectic_matrix(y)); };
  return central_difference(f, z, k);
}

Mat phase_system::vertical(const Vec& z) const {
  if (vertical_frame) return vertical_frame(z);
  Mat v = Mat::Zero(dim(), n);
  v.bottomRows(n).setIdentity();
  return v;
}

Vec phase_system::field(const Vec& z) const {
  Eigen::FullPivLU<Mat> lu(form(z));
  if (!lu.isInvertible()) fail(error_kind::structural, "symplectic matrix is singular");
  return lu.solve(dH(z));
}

Mat phase_system::field_jacobian(const Vec& z) const {
  Eigen::FullPivLU<Mat> lu(form(z));
  if (!lu.isInvertible()) fail(error_kind::structural, "symplectic matrix is singular");
  const Vec x = lu.solve(dH(z));
  Mat rhs = d2H(z);
  if (!constant_form) {
    for (int k = 0; k < dim(); ++k) rhs.col(k) -= dform(z, k) * x;
  }
  return lu.solve(rhs);
}

Mat phase_system::canonical_form(const Vec& z) const {
  const Mat v = vertical(z);
  return -(field_jacobian(z) * v).transpose() * form(z) * v;
}

phase_point make_point(const phase_system& sys, const Vec& coords, int chart) {
  if (coords.size() != sys.dim()) fail(error_kind::structural, "phase point has wrong dimension");
  if (!sys.inside(coords)) fail(error_kind::domain, "phase point outside the chart domain");
  return phase_point{coords, sys.H(coords), chart};
}

tangent_vector hamiltonian_vector_field(const phase_system& sys, const phase_point& a) {
  if (!sys.inside(a.coords)) fail(error_kind::domain, "point outside the chart domain");
  return tangent_vector{a, sys.field(a.coords)};
}

monotone_form_result monotone_form(const phase_system& sys, const phase_point& a) {
  if (!sys.inside(a.coords)) fail(error_kind::domain, "point outside the chart domain");
  Mat g = sys.canonical_form(a.coords);
  monotone_form_result out;
  out.asymmetry = asymmetry(g);
  if (out.asymmetry > 1e-10 * std::max(1.0, max_abs(g)))
    fail(error_kind::accuracy, "canonical bilinear form is not symmetric");
  out.matrix = sym(g);
  Eigen::LLT<Mat> llt(out.matrix);
  out.monotone = llt.info() == Eigen::Success && min_eigenvalue(out.matrix) > 0.0;
  return out;
}

std::vector<double> uniform_grid(double T, double spacing) {
  if (T == 0.0) return {0.0};
  const long k = std::max(1L, static_cast<long>(std::ceil(std::abs(T) / spacing - 1e-9)));
  std::vector<double> g(k + 1);
  for (long i = 0; i <= k; ++i) g[i] = T * static_cast<double>(i) / static_cast<double>(k);
  g.back() = T;
  return g;
}

double symplectic_residual(const phase_system& sys, const phase_point& a, const phase_point& z, const Mat& m) {
  const Mat r = m.transpose() * sys.form(z.coords) * m - sys.form(a.coords);
  return max_abs(r) / std::max(1.0, m.squaredNorm() / static_cast<double>(m.rows()));
}

trajectory_stepper::trajectory_stepper(const phase_system& sys, const phase_point& start, bool variational,
                                       const flow_options& opt)
    : sys_(&sys), variational_(variational), opt_(opt), z_(start.coords), chart_(start.chart) {
  if (!sys.inside(z_)) fail(error_kind::domain, "trajectory starts outside the chart domain");
  const int d = sys.dim();
  m_ = Mat::Identity(d, d);
  ode::options o;
  o.rtol = opt.rtol;
  o.atol = opt.atol;
  o.h_max = opt.max_step;
  if (variational) {
    // Monodromy entries can span many orders of magnitude in badly scaled
    // charts; no entry is asked for more than roundoff relative to its column.
    o.tolerance_floor = [d](const Vec& y, Vec& floor) {
      floor.setZero(y.size());
      for (int j = 0; j < d; ++j) {
        auto col = floor.segment(d + j * d, d);
        col.setConstant(64.0 * std::numeric_limits<double>::epsilon() * y.segment(d + j * d, d).cwiseAbs().maxCoeff());
      }
    };
  }
  const phase_system* s = sys_;
  const bool var = variational_;
  integrator_ = std::make_unique<ode::dop853>(
      [s, var, d](double, const Vec& y, Vec& dy) {
        const Vec z = y.head(d);
        dy.resize(y.size());
        if (!var) {
          dy = s->field(z);
          return;
        }
        dy.head(d) = s->field(z);
        const Mat dx = s->field_jacobian(z);
        const Mat m = unflatten(y, d, d, d);
        dy.tail(d * d) = flatten(dx * m);
      },
      o);
  restart();
}

void trajectory_stepper::restart() {
  const int d = sys_->dim();
  Vec y(variational_ ? d + d * d : d);
  y.head(d) = z_;
  if (variational_) y.tail(d * d) = flatten(m_);
  integrator_->reset(t_, y);
}

void trajectory_stepper::unpack(const Vec& y) {
  const int d = sys_->dim();
  z_ = y.head(d);
  if (variational_) m_ = unflatten(y, d, d, d);
}

phase_point trajectory_stepper::point() const { return phase_point{z_, sys_->H(z_), chart_}; }

bool trajectory_stepper::advance_to(double t) {
  if (exited_) return false;
  while (t_ != t) {
    integrator_->step_towards(t);
    ++steps_;
    const Vec& y = integrator_->y();
    const int d = sys_->dim();
    if (!sys_->inside(y.head(d))) {
      // Bisection for the last time inside the chart, on the dense output.
      double lo = integrator_->t_previous(), hi = integrator_->t();
      for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sys_->inside(integrator_->interpolate(mid).head(d)))
          lo = mid;
        else
          hi = mid;
      }
      unpack(integrator_->interpolate(lo));
      t_ = lo;
      exited_ = true;
      exit_time_ = lo;
      return false;
    }
    t_ = integrator_->t();
    unpack(y);
    if (opt_.allow_handoff && sys_->wants_handoff && sys_->wants_handoff(z_)) {
      chart_transition tr = sys_->transition(z_, chart_);
      z_ = tr.coords;
      chart_ = tr.chart;
      if (variational_) m_ = tr.jacobian * m_;
      restart();
    }
  }
  return true;
}

namespace {

void flow_one_side(const phase_system& sys, const phase_point& a, const std::vector<double>& times,
                   bool variational, const flow_options& opt, flow_segment& seg, std::vector<std::size_t>& order) {
  trajectory_stepper st(sys, a, variational, opt);
  for (std::size_t i : order) {
    const double t = times[i];
    if (!st.advance_to(t)) {
      seg.truncated = true;
      seg.exit_time = st.exit_time();
      order.clear();
      return;
    }
    seg.states[i] = st.point();
    if (variational) seg.monodromies[i] = st.monodromy();
    seg.energy_drift = std::max(seg.energy_drift, std::abs(seg.states[i].energy - a.energy));
    if (variational)
      seg.symplectic_drift = std::max(seg.symplectic_drift, symplectic_residual(sys, a, seg.states[i], st.monodromy()));
  }
}

}  // namespace

flow_segment flow_on_grid(const phase_system& sys, const phase_point& a, const std::vector<double>& times,
                          bool variational, const flow_options& opt) {
  // Accepted grids: monotone starting at 0, or ascending and containing 0.
  if (times.empty()) fail(error_kind::precondition, "empty flow grid");
  const bool ascending = std::is_sorted(times.begin(), times.end());
  const bool descending = std::is_sorted(times.rbegin(), times.rend());
  auto zero = std::find(times.begin(), times.end(), 0.0);
  if (zero == times.end() || !(ascending || (descending && zero == times.begin())))
    fail(error_kind::precondition, "flow grid must be monotone and contain t = 0");
  const std::size_t i0 = static_cast<std::size_t>(zero - times.begin());
  flow_segment seg;
  seg.base = a;
  seg.states.resize(times.size());
  if (variational) seg.monodromies.resize(times.size());
  std::vector<std::size_t> fwd, bwd;
  for (std::size_t i = i0; i < times.size(); ++i) fwd.push_back(i);
  for (std::size_t i = i0; i-- > 0;) bwd.push_back(i);
  flow_one_side(sys, a, times, variational, opt, seg, fwd);
  if (!bwd.empty()) flow_one_side(sys, a, times, variational, opt, seg, bwd);
  // Keep the contiguous block of computed nodes around t = 0.
  std::size_t lo = i0, top = i0;
  while (lo > 0 && seg.states[lo - 1].coords.size() > 0) --lo;
  while (top + 1 < times.size() && seg.states[top + 1].coords.size() > 0) ++top;
  seg.times.assign(times.begin() + lo, times.begin() + top + 1);
  seg.states = std::vector<phase_point>(seg.states.begin() + lo, seg.states.begin() + top + 1);
  if (variational) seg.monodromies = std::vector<Mat>(seg.monodromies.begin() + lo, seg.monodromies.begin() + top + 1);
  return seg;
}

flow_segment flow(const phase_system& sys, const phase_point& a, double T, const flow_options& opt) {
  return flow_on_grid(sys, a, uniform_grid(T, opt.node_spacing), false, opt);
}

flow_segment linearized_flow(const phase_system& sys, const flow_segment& seg, const flow_options& opt) {
  flow_segment out = flow_on_grid(sys, seg.base, seg.times, true, opt);
  if (out.symplectic_drift > 100.0 * std::max(opt.rtol, 1e-13) * std::max(1.0, std::abs(seg.times.back()))) {
    std::ostringstream os;
    os << "monodromy symplecticity residual " << out.symplectic_drift << " exceeds the accepted level";
    fail(error_kind::accuracy, os.str());
  }
  return out;
}

}  // namespace hamlab
