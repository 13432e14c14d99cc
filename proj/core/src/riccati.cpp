#include "hamlab/riccati.hpp"

#include "hamlab/error.hpp"
#include "hamlab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hamlab {

namespace {

constexpr double fd_delta = 1e-4;

// One-sided derivative at t from samples at t, t - d, ..., t - 4d (d signed).
template <class T>
T backward_derivative(const std::array<T, 5>& f, double d) {
  return (25.0 * f[0] - 48.0 * f[1] + 36.0 * f[2] - 16.0 * f[3] + 3.0 * f[4]) / (12.0 * d);
}

ode::options ode_opts(const riccati_integration& opt) {
  ode::options o;
  o.rtol = opt.rtol;
  o.atol = opt.atol;
  o.h_max = opt.max_step;
  return o;
}

std::string time_string(double t) {
  std::ostringstream os;
  os.precision(10);
  os << t;
  return os.str();
}

void check_grid(const std::vector<double>& grid, double t0) {
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()))
    fail(error_kind::precondition, "grid must be sorted and non-empty");
  if (t0 < grid.front() || t0 > grid.back()) fail(error_kind::precondition, "grid must contain the initial time");
}

// Indices of the grid on one side of t0, ordered away from t0.
std::vector<std::size_t> side(const std::vector<double>& grid, double t0, int dir) {
  std::vector<std::size_t> out;
  if (dir > 0) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (grid[i] > t0) out.push_back(i);
  } else {
    for (std::size_t i = grid.size(); i-- > 0;)
      if (grid[i] < t0) out.push_back(i);
  }
  return out;
}

struct linear_rhs {
  const riccati_problem* p;
  void operator()(double t, const Vec& y, Vec& dy) const {
    const int m = p->m;
    const Mat r = p->R(t);
    dy.resize(y.size());
    dy.head(m * m) = y.tail(m * m);
    Eigen::Map<Mat>(dy.data() + m * m, m, m) = -r * Eigen::Map<const Mat>(y.data(), m, m);
  }
};

Vec pack(const Mat& a, const Mat& b) {
  Vec y(a.size() + b.size());
  y << flatten(a), flatten(b);
  return y;
}

// Distance of the Lagrangian frame [B; B'] from the vertical: smallest
// singular value of the top block after orthonormalizing the columns.
double vertical_distance(const Mat& b, const Mat& bd) {
  Mat st(2 * b.rows(), b.cols());
  st << b, bd;
  const Mat q = orthonormal_basis(st);
  if (q.cols() < b.cols()) return 0.0;
  Eigen::JacobiSVD<Mat> svd(q.topRows(b.rows()));
  return svd.singularValues().minCoeff();
}

}  // namespace

Mat riccati_problem::R(double t) const {
  Mat r = curvature(t);
  if (r.rows() != m || r.cols() != m) fail(error_kind::structural, "curvature callback returned a wrong size");
  return sym(r);
}

void riccati_problem::verify_bounds(double t0, double t1, double spacing) const {
  if (!k && !(K1 && K2)) return;
  if (K1 && K2 && (*K2 <= 0.0 || *K1 < *K2)) fail(error_kind::precondition, "pinching needs K1 >= K2 > 0");
  const long steps = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / spacing)));
  for (long i = 0; i <= steps; ++i) {
    const double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(steps);
    const Mat r = R(t);
    const double lo = min_eigenvalue(r), hi = max_eigenvalue(r);
    if (k && lo < -(*k) * (*k) - 1e-9) fail(error_kind::precondition, "declared bound R >= -k^2 fails at t = " + time_string(t));
    if (K1 && K2 && (lo < -(*K1) * (*K1) - 1e-9 || hi > -(*K2) * (*K2) + 1e-9))
      fail(error_kind::precondition, "declared pinching fails at t = " + time_string(t));
  }
}

riccati_problem riccati_problem::constant(const Mat& r) {
  riccati_problem p;
  p.m = static_cast<int>(r.rows());
  const Mat c = sym(r);
  p.curvature = [c](double) { return c; };
  return p;
}

riccati_problem riccati_problem::scalar(std::function<double(double)> r) {
  riccati_problem p;
  p.m = 1;
  p.curvature = [r = std::move(r)](double t) { return Mat::Constant(1, 1, r(t)); };
  return p;
}

fundamental_solution solve_linear(const riccati_problem& p, const Mat& B0, const Mat& Bdot0,
                                  const std::vector<double>& grid, double t0, const riccati_integration& opt) {
  check_grid(grid, t0);
  const int m = p.m;
  if (B0.rows() != m || B0.cols() != m || Bdot0.rows() != m || Bdot0.cols() != m)
    fail(error_kind::structural, "initial data must be m x m");
  fundamental_solution out;
  const std::size_t count = grid.size();
  out.times = grid;
  out.B.assign(count, Mat());
  out.Bdot.assign(count, Mat());
  out.Bddot.assign(count, Mat());
  out.det_B.assign(count, 0.0);
  const Mat w0 = Bdot0.transpose() * B0 - B0.transpose() * Bdot0;
  const linear_rhs rhs{&p};
  const long mm = static_cast<long>(m) * m;

  auto state_at = [&](double ts, const Vec& ys, double t) {
    ode::dop853 s(rhs, ode_opts(opt));
    s.reset(ts, ys);
    if (t != ts) s.advance_to(t);
    return s.y();
  };
  auto det_of = [&](const Vec& y) { return unflatten(y, 0, m, m).determinant(); };
  auto vdist = [&](const Vec& y) { return vertical_distance(unflatten(y, 0, m, m), unflatten(y, mm, m, m)); };

  for (int dir : {1, -1}) {
    const auto idx = side(grid, t0, dir);
    ode::dop853 stepper(rhs, ode_opts(opt));
    stepper.reset(t0, pack(B0, Bdot0));
    double prev_det = B0.determinant();
    std::array<double, 3> vd{1.0, 1.0, vertical_distance(B0, Bdot0)};
    std::array<double, 3> vt{t0, t0, t0};
    std::array<Vec, 3> vy{stepper.y(), stepper.y(), stepper.y()};
    long seen = 0;
    auto record_node = [&](std::size_t i) {
      const Vec& y = stepper.y();
      out.B[i] = unflatten(y, 0, m, m);
      out.Bdot[i] = unflatten(y, mm, m, m);
      out.det_B[i] = out.B[i].determinant();
      const double d = std::min(fd_delta, 0.125 * std::abs(stepper.last_step())) * dir;
      std::array<Mat, 5> bd;
      bd[0] = out.Bdot[i];
      for (int j = 1; j < 5; ++j) bd[j] = unflatten(stepper.interpolate(grid[i] - j * d), mm, m, m);
      out.Bddot[i] = backward_derivative(bd, d);
    };
    std::size_t next = 0;
    if (dir > 0) {
      // the node at t0 itself
      for (std::size_t i = 0; i < count; ++i)
        if (grid[i] == t0) {
          out.B[i] = B0;
          out.Bdot[i] = Bdot0;
          out.det_B[i] = B0.determinant();
          out.Bddot[i] = -p.R(t0) * B0;
        }
    }
    while (next < idx.size()) {
      const double target = grid[idx[next]];
      const double tp = stepper.t();
      stepper.step_towards(target);
      const double t = stepper.t();
      const double dt = det_of(stepper.y());
      // sign change of det B inside the step
      if (prev_det != 0.0 && dt != 0.0 && (prev_det > 0) != (dt > 0)) {
        double a = tp, b = t, fa = prev_det;
        while (std::abs(b - a) > 1e-10) {
          const double c = 0.5 * (a + b);
          const double fc = det_of(stepper.interpolate(c));
          if ((fc > 0) == (fa > 0)) {
            a = c;
            fa = fc;
          } else {
            b = c;
          }
        }
        out.singular_times.push_back(0.5 * (a + b));
      }
      prev_det = dt;
      // local minimum of the vertical distance without a sign change
      vd = {vd[1], vd[2], vdist(stepper.y())};
      vt = {vt[1], vt[2], t};
      vy = {vy[1], vy[2], stepper.y()};
      ++seen;
      if (seen >= 2 && vd[1] < vd[0] && vd[1] < vd[2] && vd[1] < 0.2) {
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = vt[0], b = vt[2];
        const Vec ya = vy[0];
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = vdist(state_at(vt[0], ya, c)), fd = vdist(state_at(vt[0], ya, d));
        while (std::abs(b - a) > 1e-11) {
          if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = vdist(state_at(vt[0], ya, c));
          } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = vdist(state_at(vt[0], ya, d));
          }
        }
        const double tm = 0.5 * (a + b);
        if (std::min(fc, fd) < 1e-9) {
          const bool dup = std::any_of(out.singular_times.begin(), out.singular_times.end(),
                                       [&](double s) { return std::abs(s - tm) < 1e-7; });
          if (!dup) out.singular_times.push_back(tm);
        }
      }
      while (next < idx.size() && stepper.t() == grid[idx[next]]) {
        record_node(idx[next]);
        ++next;
      }
    }
  }
  std::sort(out.singular_times.begin(), out.singular_times.end());
  for (double s : out.singular_times)
    if (s > t0 + 1e-12) {
      out.first_singular_time = s;
      break;
    }
  for (std::size_t i = 0; i < count; ++i) {
    const Mat w = out.Bdot[i].transpose() * out.B[i] - out.B[i].transpose() * out.Bdot[i];
    const double scale = std::max(1.0, out.B[i].norm() * out.Bdot[i].norm());
    out.wronskian_drift = std::max(out.wronskian_drift, max_abs(w - w0) / scale);
  }
  if (out.wronskian_drift > 1e-6)
    fail(error_kind::accuracy, "Wronskian drift " + time_string(out.wronskian_drift) + " exceeds 1e-6");
  return out;
}

riccati_solution riccati_from_fundamental(const riccati_problem& p, const fundamental_solution& fund) {
  riccati_solution out;
  for (std::size_t i = 0; i < fund.times.size(); ++i) {
    const Mat& b = fund.B[i];
    if (b.norm() == 0.0) continue;  // the base point of B(t0) = 0
    Eigen::JacobiSVD<Mat> svd(b);
    const auto sv = svd.singularValues();
    if (sv.minCoeff() == 0.0 || sv.maxCoeff() / sv.minCoeff() > 1e12)
      fail(error_kind::domain, "B is singular near t = " + time_string(fund.times[i]));
    const Eigen::PartialPivLU<Mat> lu(b.transpose());  // S = B' B^{-1}
    const Mat s = lu.solve(fund.Bdot[i].transpose()).transpose();
    const Mat sdot = lu.solve(fund.Bddot[i].transpose()).transpose() - s * s;
    out.times.push_back(fund.times[i]);
    out.asymmetry = std::max(out.asymmetry, asymmetry(s));
    const Mat ss = sym(s);
    out.residual = std::max(out.residual, max_abs(sdot + ss * ss + p.R(fund.times[i])));
    out.S.push_back(ss);
  }
  return out;
}

riccati_solution solve_riccati(const riccati_problem& p, const Mat& S0, const std::vector<double>& grid, double t0,
                               const riccati_integration& opt) {
  check_grid(grid, t0);
  const int m = p.m;
  riccati_solution out;
  out.times = grid;
  out.S.assign(grid.size(), Mat());
  auto rhs = [&](double t, const Vec& y, Vec& dy) {
    const Eigen::Map<const Mat> s(y.data(), m, m);
    dy.resize(y.size());
    Eigen::Map<Mat>(dy.data(), m, m) = -s * s - p.R(t);
  };
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] == t0) out.S[i] = sym(S0);
  for (int dir : {1, -1}) {
    const auto idx = side(grid, t0, dir);
    ode::dop853 stepper(rhs, ode_opts(opt));
    stepper.reset(t0, flatten(sym(S0)));
    for (std::size_t i : idx) {
      while (stepper.t() != grid[i]) {
        stepper.step_towards(grid[i]);
        if (!stepper.y().allFinite() || stepper.y().cwiseAbs().maxCoeff() > 1e12)
          fail(error_kind::domain, "Riccati solution blows up near t = " + time_string(stepper.t()));
      }
      const Mat s = unflatten(stepper.y(), 0, m, m);
      const double d = std::min(fd_delta, 0.125 * std::abs(stepper.last_step())) * dir;
      std::array<Mat, 5> f;
      f[0] = s;
      for (int j = 1; j < 5; ++j) f[j] = unflatten(stepper.interpolate(grid[i] - j * d), 0, m, m);
      const Mat sdot = backward_derivative(f, d);
      out.residual = std::max(out.residual, max_abs(sdot + s * s + p.R(grid[i])));
      out.asymmetry = std::max(out.asymmetry, asymmetry(s));
      out.S[i] = sym(s);
    }
  }
  return out;
}

two_point_solution two_point(const riccati_problem& p, double s, const std::vector<double>& grid,
                             const riccati_integration& opt) {
  if (s == 0.0) fail(error_kind::precondition, "two-point horizon must be nonzero");
  std::vector<double> g = grid;
  g.push_back(0.0);
  g.push_back(s);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  const double lo = std::min(0.0, s), hi = std::max(0.0, s);
  if (g.front() < lo || g.back() > hi) fail(error_kind::precondition, "two-point grid must lie between 0 and s");
  const int m = p.m;
  const Mat I = Mat::Identity(m, m), Z = Mat::Zero(m, m);
  const fundamental_solution b = solve_linear(p, Z, I, g, 0.0, opt);
  const fundamental_solution c = solve_linear(p, I, Z, g, 0.0, opt);
  for (double t : b.singular_times)
    if (std::abs(t) > 1e-9 && t * s > 0 && std::abs(t) <= std::abs(s) + 1e-9)
      fail(error_kind::conjugate_point, "conjugate time t = " + time_string(t) + " inside the two-point interval");
  const std::size_t is = std::find(g.begin(), g.end(), s) - g.begin();
  const Eigen::PartialPivLU<Mat> bs(b.B[is]);
  const Mat x = bs.solve(c.B[is]);  // B(s)^{-1} C(s)
  two_point_solution out;
  out.s = s;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool requested = std::binary_search(grid.begin(), grid.end(), g[i]) || g[i] == 0.0 || g[i] == s;
    if (!requested) continue;
    const Mat d = c.B[i] - b.B[i] * x;
    const Mat dd = c.Bdot[i] - b.Bdot[i] * x;
    out.times.push_back(g[i]);
    out.D.push_back(d);
    out.Ddot.push_back(dd);
    if (g[i] == s) {
      out.U.push_back(Mat());
    } else {
      const Mat u = d.transpose().partialPivLu().solve(dd.transpose()).transpose();
      out.asymmetry = std::max(out.asymmetry, asymmetry(u));
      out.U.push_back(sym(u));
    }
    if (g[i] == 0.0)
      out.M.push_back(Mat());
    else
      out.M.push_back(b.B[i].partialPivLu().solve(c.B[i]) - x);
    if (g[i] == 0.0) out.boundary_residual = std::max(out.boundary_residual, max_abs(d - I));
    if (g[i] == s) {
      out.boundary_residual = std::max(out.boundary_residual, max_abs(d));
      const Mat target = -b.B[is].transpose().partialPivLu().solve(I);
      out.boundary_residual = std::max(out.boundary_residual, max_abs(dd - target) / std::max(1.0, max_abs(target)));
    }
  }
  if (out.boundary_residual > 1e-7) fail(error_kind::accuracy, "two-point boundary conditions violated");
  return out;
}

std::vector<Mat> two_point_U(const riccati_problem& p, double s, const std::vector<double>& grid, std::vector<Mat>* D,
                             const riccati_integration& opt) {
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end())) fail(error_kind::precondition, "grid must be sorted");
  const int dir = s > grid.back() ? -1 : (s < grid.front() ? 1 : 0);
  if (dir == 0) fail(error_kind::precondition, "horizon must lie outside the grid");
  const int m = p.m;
  const long mm = static_cast<long>(m) * m;
  const linear_rhs rhs{&p};
  ode::dop853 stepper(rhs, ode_opts(opt));
  // D(s, s) = 0 and D'(s, s) = -I up to a right factor, which U does not see.
  stepper.reset(s, pack(Mat::Zero(m, m), -Mat::Identity(m, m)));
  const double edge = dir < 0 ? grid.back() : grid.front();
  auto renormalize = [&]() {
    Mat st(2 * m, m);
    st << unflatten(stepper.y(), 0, m, m), unflatten(stepper.y(), mm, m, m);
    const Eigen::HouseholderQR<Mat> qr(st);
    const Mat q = qr.householderQ() * Mat::Identity(2 * m, m);
    stepper.reset(stepper.t(), pack(q.topRows(m), q.bottomRows(m)));
  };
  // renormalize every unit of time until the grid is reached
  double t = s;
  while ((edge - t) * dir > 1.0) {
    t += dir;
    stepper.advance_to(t);
    renormalize();
  }
  std::vector<Mat> U(grid.size()), raw(grid.size());
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) order[i] = dir > 0 ? i : grid.size() - 1 - i;
  for (std::size_t i : order) {
    stepper.advance_to(grid[i]);
    const Mat d = unflatten(stepper.y(), 0, m, m), dd = unflatten(stepper.y(), mm, m, m);
    if (vertical_distance(d, dd) < 1e-9)
      fail(error_kind::conjugate_point, "conjugate time between the grid and horizon " + time_string(s));
    U[i] = sym(d.transpose().partialPivLu().solve(dd.transpose()).transpose());
    raw[i] = d;
  }
  if (D) {
    D->clear();
    const auto zero = std::find(grid.begin(), grid.end(), 0.0);
    if (zero != grid.end()) {
      const Eigen::PartialPivLU<Mat> d0(raw[zero - grid.begin()].transpose());
      for (const Mat& r : raw) D->push_back(d0.solve(r.transpose()).transpose());  // r D(0)^{-1}
    }
  }
  return U;
}

limit_solution limit_from_source(const horizon_source& source, limit_direction dir, const std::vector<double>& grid,
                                 const limit_options& opt) {
  limit_solution out;
  out.direction = dir;
  out.times = grid;
  const double sign = dir == limit_direction::plus ? 1.0 : -1.0;
  std::vector<Mat> prev;
  for (double h = opt.first_horizon; h <= opt.max_horizon * (1 + 1e-12); h *= 2.0) {
    const double s = sign * h;
    std::vector<Mat> cur = source(s);
    if (cur.size() != grid.size()) fail(error_kind::structural, "horizon source returned a wrong grid");
    out.horizons.push_back(s);
    if (!prev.empty()) {
      double gap = 0.0;
      for (std::size_t i = 0; i < cur.size(); ++i) {
        gap = std::max(gap, max_abs(cur[i] - prev[i]));
        const Mat diff = dir == limit_direction::plus ? Mat(cur[i] - prev[i]) : Mat(prev[i] - cur[i]);
        const double v = -min_eigenvalue(sym(diff));
        out.monotone_violation = std::max(out.monotone_violation, v);
        if (v > opt.monotone_slack)
          fail(error_kind::inconsistency, "horizon limit is not monotone at t = " + time_string(grid[i]) +
                                              " between horizons " + time_string(s / 2) + " and " + time_string(s));
      }
      out.gaps.push_back(gap);
      out.convergence_gap = gap;
      const std::size_t k = out.gaps.size();
      if (k >= 2 && out.gaps[k - 1] < opt.tol && out.gaps[k - 2] < opt.tol) {
        out.converged = true;
        out.U = std::move(cur);
        return out;
      }
    }
    prev = std::move(cur);
  }
  out.U = std::move(prev);
  return out;
}

limit_solution limit_riccati(const riccati_problem& p, limit_direction dir, const std::vector<double>& grid,
                             const limit_options& opt, const riccati_integration& iopt) {
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end())) fail(error_kind::precondition, "grid must be sorted");
  if (dir == limit_direction::plus ? grid.back() >= opt.first_horizon : grid.front() <= -opt.first_horizon)
    fail(error_kind::precondition, "limit grid must lie inside the first horizon");
  p.verify_bounds(grid.front(), grid.back());
  std::vector<Mat> last_D;
  auto source = [&](double s) { return two_point_U(p, s, grid, &last_D, iopt); };
  limit_solution out = limit_from_source(source, dir, grid, opt);
  out.D = last_D;
  if (p.K1 && p.K2) {
    const double k1 = *p.K1, k2 = *p.K2;
    const double sg = dir == limit_direction::plus ? 1.0 : -1.0;
    double bv = 0.0, ev = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      // U+ in [-K1, -K2], U- in [K2, K1]
      const Mat u = sg * out.U[i];
      bv = std::max({bv, max_eigenvalue(u) + k2, -k1 - min_eigenvalue(u)});
      if (!out.D.empty() && sg * grid[i] >= 0.0) {
        const double tau = std::abs(grid[i]);
        Eigen::JacobiSVD<Mat> svd(out.D[i]);
        const double lo = std::exp(-k1 * tau), hi = std::exp(-k2 * tau);
        ev = std::max({ev, lo / svd.singularValues().minCoeff() - 1.0, svd.singularValues().maxCoeff() / hi - 1.0});
      }
    }
    out.bound_violation = bv;
    if (!out.D.empty()) out.envelope_violation = ev;
  }
  return out;
}

comparison_report comparison_check(const riccati_problem& p1, const riccati_problem& p2, const Mat& S1_0,
                                   const Mat& S2_0, const std::vector<double>& grid, bool backward,
                                   const riccati_integration& opt) {
  comparison_report rep;
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end())) fail(error_kind::precondition, "grid must be sorted");
  const double t0 = backward ? grid.back() : grid.front();
  const Mat init = backward ? Mat(S1_0 - S2_0) : Mat(S2_0 - S1_0);
  if (min_eigenvalue(sym(init)) < -1e-12) {
    rep.accepted = false;
    rep.reason = backward ? "initial data must satisfy S2 <= S1" : "initial data must satisfy S2 >= S1";
    return rep;
  }
  for (double t : grid)
    if (min_eigenvalue(p1.R(t) - p2.R(t)) < -1e-12) {
      rep.accepted = false;
      rep.reason = "curvatures must satisfy R1 >= R2, fails at t = " + time_string(t);
      return rep;
    }
  const riccati_solution a = solve_riccati(p1, S1_0, grid, t0, opt);
  const riccati_solution b = solve_riccati(p2, S2_0, grid, t0, opt);
  rep.times = grid;
  rep.worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Mat d = backward ? Mat(a.S[i] - b.S[i]) : Mat(b.S[i] - a.S[i]);
    rep.min_eig.push_back(min_eigenvalue(sym(d)));
    rep.worst = std::min(rep.worst, rep.min_eig.back());
  }
  return rep;
}

blowup_report blowup_certificate(const fundamental_solution& fund, double K) {
  blowup_report rep;
  std::vector<std::pair<double, double>> tail;  // (t, min singular value) for t > 0
  for (std::size_t i = 0; i < fund.times.size(); ++i)
    if (fund.times[i] > 0.0) {
      Eigen::JacobiSVD<Mat> svd(fund.B[i]);
      tail.emplace_back(fund.times[i], svd.singularValues().minCoeff());
    }
  if (tail.empty()) return rep;
  rep.achieved = tail.back().second;
  const double threshold = K * (1.0 - 1e-9);
  if (rep.achieved < threshold) return rep;
  rep.reached = true;
  std::size_t i = tail.size() - 1;
  while (i > 0 && tail[i - 1].second >= threshold) --i;
  rep.T = tail[i].first;
  return rep;
}

}  // namespace hamlab
