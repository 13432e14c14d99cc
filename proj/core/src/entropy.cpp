#include "hamlab/entropy.hpp"

#include "hamlab/error.hpp"
#include "hamlab/parallel.hpp"
#include "hamlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hamlab {

double kahan_sum(const std::vector<double>& v) {
  double sum = 0.0, c = 0.0;
  for (double x : v) {
    const double y = x - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum;
}

double batch_means_stderr(const std::vector<double>& v, int batches) {
  const int n = static_cast<int>(v.size());
  const int b = std::min(batches, n);
  if (b < 2) return 0.0;
  std::vector<double> means;
  for (int k = 0; k < b; ++k) {
    const int lo = k * n / b, hi = (k + 1) * n / b;
    means.push_back(kahan_sum(std::vector<double>(v.begin() + lo, v.begin() + hi)) / (hi - lo));
  }
  const double mu = kahan_sum(means) / b;
  std::vector<double> sq;
  for (double x : means) sq.push_back((x - mu) * (x - mu));
  return std::sqrt(kahan_sum(sq) / (b - 1) / b);
}

std::vector<sample_path> draw_samples(const model& m, const sampler_options& opt) {
  if (opt.samples < 1) fail(error_kind::config, "at least one sample is needed");
  return parallel_map<sample_path>(
      static_cast<std::size_t>(opt.samples),
      [&](std::size_t i) {
        sample_path path;
        auto rng = stream(opt.seed, i);
        const phase_point start = m.sample(rng);
        if (std::abs(start.energy - m.energy) > 1e-9) fail(error_kind::accuracy, "sampler left the energy level");
        path.start = start;
        if (opt.mode == sampling_mode::level_set) {
          path.points.push_back(start);
          return path;
        }
        trajectory_stepper st(m.system, start, false);
        if (!st.advance_to(opt.burn_in)) {
          path.discarded = true;
          return path;
        }
        const int nodes = std::max(1, static_cast<int>(std::floor(opt.horizon / opt.spacing + 1e-9)) + 1);
        for (int k = 0; k < nodes; ++k) {
          if (k > 0 && !st.advance_to(opt.burn_in + k * opt.spacing)) {
            path.discarded = true;
            return path;
          }
          path.points.push_back(st.point());
        }
        return path;
      },
      opt.threads);
}

estimate birkhoff_average(const model& m, const std::vector<sample_path>& paths, const sampler_options& opt,
                          const observable& f) {
  struct one {
    bool ok = false;
    double value = 0.0;
  };
  const auto values = parallel_map<one>(
      paths.size(),
      [&](std::size_t i) {
        one r;
        if (paths[i].discarded || paths[i].points.empty()) return r;
        std::vector<double> v;
        for (const phase_point& p : paths[i].points) {
          const auto x = f(m.system, p);
          if (!x) return r;
          v.push_back(*x);
        }
        r.ok = true;
        r.value = kahan_sum(v) / static_cast<double>(v.size());
        return r;
      },
      opt.threads);
  estimate e;
  for (const one& r : values) {
    if (r.ok)
      e.per_sample.push_back(r.value);
    else
      ++e.discarded;
  }
  e.used = static_cast<int>(e.per_sample.size());
  if (e.used > 0) {
    e.mean = kahan_sum(e.per_sample) / e.used;
    e.std_error = batch_means_stderr(e.per_sample, opt.batches);
  }
  return e;
}

estimate birkhoff_average(const model& m, const sampler_options& opt, const observable& f) {
  return birkhoff_average(m, draw_samples(m, opt), opt, f);
}

observable reduced_trace_observable(const jacobi_options& opt) {
  return [opt](const phase_system& sys, const phase_point& p) -> std::optional<double> {
    if (sys.n < 2) return 0.0;
    return reduced_local(sys, p.coords, p.chart, opt).R.trace();
  };
}

observable eigen_spread_observable(const jacobi_options& opt) {
  return [opt](const phase_system& sys, const phase_point& p) -> std::optional<double> {
    if (sys.n < 2) return 0.0;
    const Mat r = reduced_local(sys, p.coords, p.chart, opt).R;
    Eigen::SelfAdjointEigenSolver<Mat> es(r);
    return (1.0 - es.eigenvalues().array()).abs().sum();
  };
}

observable unstable_trace_observable(const hyperbolicity_options& opt) {
  return [opt](const phase_system& sys, const phase_point& p) -> std::optional<double> {
    if (sys.n < 2) return 0.0;
    try {
      const invariant_distribution d = build_invariant_distribution(sys, p, -1, opt);
      if (!d.converged) return std::nullopt;
      return d.U.trace();
    } catch (const hamlab_error& e) {
      if (e.kind() == error_kind::conjugate_point || e.kind() == error_kind::inconsistency) return std::nullopt;
      throw;
    }
  };
}

double qr_lyapunov_sum(const phase_system& sys, const phase_point& a, const lyapunov_options& lopt,
                       const jacobi_options& jopt) {
  const int m = sys.n - 1;
  if (m == 0) return 0.0;
  // Vertical start: for nonpositive curvature these fields never shrink, and
  // their stable component is bounded away from the whole vector.
  reduced_local_frame rl = reduced_local(sys, a.coords, a.chart, jopt);
  Mat w = rl.E;
  phase_point p = a;
  double log_sum = 0.0;
  const int steps = static_cast<int>(std::round(lopt.horizon / lopt.interval));
  const int burn = static_cast<int>(std::round(lopt.burn / lopt.interval));
  for (int k = 0; k < steps; ++k) {
    trajectory_stepper st(sys, p, true);
    if (!st.advance_to(lopt.interval)) fail(error_kind::domain, "trajectory leaves the chart in the QR run");
    p = st.point();
    w = st.monodromy() * w;
    rl = reduced_local(sys, p.coords, p.chart, jopt);
    const Mat c = reduced_coordinates(sys, p.coords, rl.E, rl.F, w);
    const Eigen::HouseholderQR<Mat> qr(c);
    const Mat r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    if (k >= burn)
      for (int i = 0; i < m; ++i) log_sum += std::log(std::abs(r(i, i)));
    w = r.transpose().triangularView<Eigen::Lower>().solve(w.transpose()).transpose();  // w R^{-1}
  }
  return log_sum / ((steps - burn) * lopt.interval);
}

sampler_options window_sampler(const sampler_options& opt, const lyapunov_options& lopt) {
  if (!(lopt.interval > 0.0) || !(lopt.burn >= 0.0) || !(lopt.horizon > lopt.burn))
    fail(error_kind::config, "lyapunov window needs 0 <= burn < horizon and interval > 0");
  sampler_options w = opt;
  w.mode = sampling_mode::trajectory;
  w.burn_in = lopt.burn;
  w.horizon = lopt.horizon - lopt.burn;
  w.spacing = lopt.interval;
  return w;
}

namespace {

lyapunov_report lyapunov_on_paths(const model& m, const std::vector<sample_path>& paths, const sampler_options& opt,
                                  const hyperbolicity_options& hopt, const lyapunov_options& lopt) {
  lyapunov_report rep;
  rep.riccati = birkhoff_average(m, paths, opt, unstable_trace_observable(hopt));
  struct one {
    bool ok = false;
    double v = 0.0;
  };
  const auto qr = parallel_map<one>(
      paths.size(),
      [&](std::size_t i) {
        one r;
        if (paths[i].discarded) return r;
        try {
          r.v = qr_lyapunov_sum(m.system, paths[i].start, lopt, hopt.jacobi);
          r.ok = true;
        } catch (const hamlab_error& e) {
          if (e.kind() != error_kind::domain) throw;
        }
        return r;
      },
      opt.threads);
  for (const one& r : qr) {
    if (r.ok)
      rep.qr.per_sample.push_back(r.v);
    else
      ++rep.qr.discarded;
  }
  rep.qr.used = static_cast<int>(rep.qr.per_sample.size());
  if (rep.qr.used > 0) {
    rep.qr.mean = kahan_sum(rep.qr.per_sample) / rep.qr.used;
    rep.qr.std_error = batch_means_stderr(rep.qr.per_sample, opt.batches);
  }
  rep.gap = std::abs(rep.riccati.mean - rep.qr.mean);
  const double se = std::hypot(rep.riccati.std_error, rep.qr.std_error);
  rep.tolerance = 3.0 * std::max(se, lopt.stderr_floor);
  rep.consistent = rep.riccati.used > 0 && rep.qr.used > 0 && rep.gap < rep.tolerance;
  return rep;
}

}  // namespace

lyapunov_report lyapunov_via_riccati(const model& m, const sampler_options& opt, const hyperbolicity_options& hopt,
                                     const lyapunov_options& lopt) {
  const sampler_options w = window_sampler(opt, lopt);
  return lyapunov_on_paths(m, draw_samples(m, w), w, hopt, lopt);
}

ergodic_report entropy_bounds(const model& m, const sampler_options& opt, const hyperbolicity_options& hopt,
                              const lyapunov_options& lopt) {
  ergodic_report rep;
  const sampler_options w = window_sampler(opt, lopt);
  const std::vector<sample_path> paths = draw_samples(m, w);
  rep.reduced_trace = birkhoff_average(m, paths, w, reduced_trace_observable(hopt.jacobi));
  rep.eigen_spread = birkhoff_average(m, paths, w, eigen_spread_observable(hopt.jacobi));
  rep.lyapunov = lyapunov_on_paths(m, paths, w, hopt, lopt);
  rep.entropy_estimate = rep.lyapunov.riccati.mean;
  rep.entropy_stderr = rep.lyapunov.riccati.std_error;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  rep.max_eigenvalue = -std::numeric_limits<double>::infinity();
  for (const sample_path& p : paths) {
    if (p.discarded || m.system.n < 2) continue;
    for (const phase_point& q : p.points) {
      const Mat r = reduced_local(m.system, q.coords, q.chart, hopt.jacobi).R;
      rep.min_eigenvalue = std::min(rep.min_eigenvalue, hamlab::min_eigenvalue(r));
      rep.max_eigenvalue = std::max(rep.max_eigenvalue, hamlab::max_eigenvalue(r));
    }
  }
  if (m.system.n < 2) rep.min_eigenvalue = rep.max_eigenvalue = 0.0;
  const double n1 = m.system.n - 1;
  if (rep.reduced_trace.mean <= 0.0) {
    rep.bound1 = std::sqrt(n1) * std::sqrt(-rep.reduced_trace.mean);
  } else {
    rep.notes.push_back("bound1 invalid: mean reduced trace is positive");
  }
  rep.bound2 = 0.5 * rep.eigen_spread.mean;
  if (rep.lyapunov.riccati.discarded > 0)
    rep.notes.push_back(std::to_string(rep.lyapunov.riccati.discarded) +
                        " samples without a converged U- limit (conjugate points or divergence) excluded");
  bool have_estimate = rep.lyapunov.riccati.used > 0;
  if (!have_estimate && rep.lyapunov.qr.used > 0) {
    rep.entropy_estimate = rep.lyapunov.qr.mean;
    rep.entropy_stderr = rep.lyapunov.qr.std_error;
    have_estimate = true;
    rep.notes.push_back("U- unavailable on every sample; estimate is the QR growth rate of vertical fields");
  }
  if (!have_estimate) rep.notes.push_back("no entropy estimate available");
  const double slack = 2.0 * std::max(rep.entropy_stderr, lopt.stderr_floor);
  rep.bound1_holds = rep.bound1 && have_estimate && rep.entropy_estimate <= *rep.bound1 + slack;
  rep.bound2_holds = have_estimate && rep.entropy_estimate <= rep.bound2 + slack;
  return rep;
}

total_curvature_report total_curvature_check(const model& m, const sampler_options& opt, double scan_horizon,
                                             const hyperbolicity_options& hopt) {
  total_curvature_report rep;
  const std::vector<sample_path> paths = draw_samples(m, opt);
  if (m.system.n >= 2) {
    const auto found = parallel_map<int>(
        paths.size(),
        [&](std::size_t i) {
          if (paths[i].discarded || paths[i].points.empty()) return 0;
          try {
            return static_cast<int>(
                conjugate_scan(m.system, paths[i].points.front(), scan_horizon, true, hopt).points.size());
          } catch (const hamlab_error& e) {
            if (e.kind() != error_kind::domain) throw;
            return 0;
          }
        },
        opt.threads);
    const int hits = static_cast<int>(std::count_if(found.begin(), found.end(), [](int k) { return k > 0; }));
    if (hits > 0) {
      rep.applicable = false;
      std::ostringstream os;
      os << hits << " sampled trajectories have conjugate points before t = " << scan_horizon << "; check skipped";
      rep.note = os.str();
      return rep;
    }
  }
  rep.trace = birkhoff_average(m, paths, opt, reduced_trace_observable(hopt.jacobi));
  rep.pass = rep.trace.mean <= 2.0 * rep.trace.std_error;
  if (std::abs(rep.trace.mean) <= 2.0 * rep.trace.std_error) {
    double mx = 0.0;
    for (double v : rep.trace.per_sample) mx = std::max(mx, std::abs(v));
    rep.max_abs = mx;
  }
  return rep;
}

}  // namespace hamlab
