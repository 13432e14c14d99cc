#include "hamlab/commands.hpp"

#include "hamlab/hamlab.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

namespace hamlab::app {

namespace {

namespace fs = std::filesystem;

struct context {
  const run_config& cfg;
  command_outcome& out;
  json& result;
  int code = exit_ok;
};

model load_model(const run_config& cfg) {
  if (cfg.model.empty()) fail(error_kind::config, "model.name is required for '" + cfg.command + "'");
  return instantiate(cfg.model, cfg.params);
}

phase_point start_point(const model& m, const run_config& cfg) {
  if (!cfg.start) {
    auto g = stream(cfg.seed, 0);
    return m.sample(g);
  }
  const start_spec& s = *cfg.start;
  if (s.coords) {
    if (s.coords->size() != m.system.dim()) fail(error_kind::config, "start.coords has the wrong length");
    return make_point(m.system, *s.coords, s.chart);
  }
  if (s.x->size() != m.system.n) fail(error_kind::config, "start.x has the wrong length");
  return m.point_from(*s.x, s.angle);
}

std::vector<phase_point> draw_points(const model& m, const run_config& cfg) {
  std::vector<phase_point> pts;
  for (int i = 0; i < cfg.samples; ++i) {
    auto g = stream(cfg.seed, static_cast<std::uint64_t>(i));
    pts.push_back(m.sample(g));
  }
  return pts;
}

hyperbolicity_options hyper_options(const run_config& cfg) {
  hyperbolicity_options o;
  if (cfg.tol) o.limit_tol = *cfg.tol;
  return o;
}

json tolerances_json(const hyperbolicity_options& h, const riccati_integration& ri, const run_config& cfg) {
  json t;
  t["flow_rtol"] = h.flow.rtol;
  t["flow_atol"] = h.flow.atol;
  t["jacobi_stencil"] = h.jacobi.stencil;
  t["jacobi_rtol"] = h.jacobi.rtol;
  t["jacobi_atol"] = h.jacobi.atol;
  t["riccati_rtol"] = ri.rtol;
  t["riccati_atol"] = ri.atol;
  t["limit_tol"] = h.limit_tol;
  t["limit_first_horizon"] = h.first_horizon;
  t["limit_max_horizon"] = h.max_horizon;
  t["curvature_spacing"] = h.curvature_spacing;
  t["transversality_angle"] = h.transversality_angle;
  t["negative_threshold"] = h.negative_threshold;
  t["positive_slack"] = h.positive_slack;
  t["rate_margin"] = h.rate_margin;
  t["grid_spacing"] = cfg.spacing;
  return t;
}

json point_json(const phase_point& p) {
  json j;
  j["coords"] = to_json(p.coords);
  j["chart"] = p.chart;
  j["energy"] = p.energy;
  return j;
}

std::string write_table(context& c, const std::string& name, const csv_table& t) {
  if (!c.cfg.csv) return {};
  write_csv((fs::path(c.cfg.out_dir) / name).string(), t);
  c.out.files.push_back(name);
  return name;
}

double max_abs_diff(const Mat& a, const Mat& b) { return max_abs(a - b); }

// ---------------------------------------------------------------- curvature

void cmd_curvature(context& c) {
  const model m = load_model(c.cfg);
  const phase_system& sys = m.system;
  const phase_point a = start_point(m, c.cfg);
  const hyperbolicity_options h = hyper_options(c.cfg);
  const double T = c.cfg.horizon.value_or(5.0);
  const std::vector<double> grid = uniform_grid(T, c.cfg.spacing);
  c.result["start"] = point_json(a);
  c.result["horizon"] = T;

  const monotone_form_result mono = monotone_form(sys, a);
  c.result["monotone"] = mono.monotone;
  if (!mono.monotone) {
    c.result["message"] = "the canonical form is not positive definite at the start point";
    c.code = exit_hypothesis;
    return;
  }

  const jacobi_curve_sample curve = jacobi_curve(sys, a, grid, h.flow);
  const canonical_frame_result full = canonical_frame(sys, curve, h.jacobi);
  std::optional<reduced_frame_result> red;
  if (sys.n >= 2) red = reduced_jacobi_frame(sys, a, grid, h.jacobi, h.flow);

  // Frame and bracket curvature at a handful of points along the trajectory.
  double method_gap = 0.0;
  const std::size_t stride = std::max<std::size_t>(1, curve.states.size() / 5);
  for (std::size_t k = 0; k < curve.states.size(); k += stride) {
    const Mat rf = curvature_operator(sys, curve.states[k], curvature_method::frame, h.jacobi).R;
    const Mat rb = curvature_operator(sys, curve.states[k], curvature_method::bracket, h.jacobi).R;
    method_gap = std::max(method_gap, max_abs_diff(rf, rb));
  }
  c.result["method_gap"] = method_gap;
  c.result["darboux_residual"] = full.max_darboux_residual;
  c.result["asymmetry"] = full.max_asymmetry;
  c.result["frame_gauge"] = full.frame_gauge;
  c.result["curvature_at_start"] = to_json(full.curvature.front());

  if (red) {
    const reduced_formula_report f = reduced_curvature_via_formula(sys, a, h.jacobi);
    json r;
    r["at_start"] = to_json(f.R_direct);
    r["formula_mismatch"] = f.mismatch;
    r["transversality"] = f.transversality;
    r["darboux_residual"] = red->max_darboux_residual;
    r["asymmetry"] = red->max_asymmetry;
    if (m.oracles.reduced_curvature) {
      double dev = 0.0;
      for (const Mat& rr : red->curvature)
        dev = std::max(dev, max_abs_diff(rr, *m.oracles.reduced_curvature * Mat::Identity(rr.rows(), rr.cols())));
      r["oracle"] = *m.oracles.reduced_curvature;
      r["oracle_deviation"] = dev;
    }
    c.result["reduced"] = r;
  } else {
    c.result["reduced"] = nullptr;
  }

  csv_table t;
  t.header = {"t"};
  const Eigen::Index n = full.curvature.front().rows();
  for (auto& s : matrix_columns("R", n, n)) t.header.push_back(s);
  t.header.push_back("R_min_eig");
  if (red) {
    const Eigen::Index r = red->curvature.front().rows();
    for (auto& s : matrix_columns("Rr", r, r)) t.header.push_back(s);
    t.header.push_back("Rr_min_eig");
  }
  for (std::size_t k = 0; k < full.times.size(); ++k) {
    std::vector<double> row{full.times[k]};
    append_matrix(row, full.curvature[k]);
    row.push_back(min_eigenvalue(full.curvature[k]));
    if (red) {
      append_matrix(row, red->curvature[k]);
      row.push_back(min_eigenvalue(red->curvature[k]));
    }
    t.add(std::move(row));
  }
  write_table(c, "curvature.csv", t);
}

// ---------------------------------------------------------------- conjugate

void cmd_conjugate(context& c) {
  const model m = load_model(c.cfg);
  const phase_system& sys = m.system;
  const phase_point a = start_point(m, c.cfg);
  const hyperbolicity_options h = hyper_options(c.cfg);
  const double T = c.cfg.horizon.value_or(10.0);
  const bool reduced = c.cfg.reduced && sys.n >= 2;
  c.result["start"] = point_json(a);
  c.result["horizon"] = T;
  c.result["reduced"] = reduced;
  if (c.cfg.reduced && !reduced) c.result["message"] = "one degree of freedom: scanning the full Jacobi curve";

  const conjugate_report scan = conjugate_scan(sys, a, T, reduced, h);
  json pts = json::array();
  for (const conjugate_point& p : scan.points)
    pts.push_back({{"time", p.time}, {"multiplicity", p.multiplicity}, {"degenerate", p.degenerate}});
  c.result["points"] = pts;
  c.result["method"] = scan.method;

  if (reduced && m.oracles.conjugate_spacing) {
    const double d = *m.oracles.conjugate_spacing;
    std::vector<double> expected;
    for (int k = 1; k * d <= T - 1e-9; ++k) expected.push_back(k * d);
    double err = 0.0;
    bool count_ok = expected.size() == scan.points.size();
    for (std::size_t i = 0; i < std::min(expected.size(), scan.points.size()); ++i)
      err = std::max(err, std::abs(expected[i] - scan.points[i].time));
    c.result["oracle"] = {{"spacing", d}, {"expected", expected}, {"count_matches", count_ok}, {"max_error", err}};
  }

  const riccati_problem p = curvature_problem(sys, a, 0.0, T, reduced, h);
  const std::vector<double> grid = uniform_grid(T, c.cfg.spacing);
  const fundamental_solution fund = solve_linear(p, Mat::Zero(p.m, p.m), Mat::Identity(p.m, p.m), grid);
  c.result["wronskian_drift"] = fund.wronskian_drift;
  csv_table t;
  t.header = {"t", "det_B"};
  for (std::size_t k = 0; k < fund.times.size(); ++k) t.add({fund.times[k], fund.det_B[k]});
  write_table(c, "conjugate.csv", t);
}

// ------------------------------------------------------------ distributions

void cmd_distributions(context& c) {
  const model m = load_model(c.cfg);
  const phase_system& sys = m.system;
  if (sys.n < 2) fail(error_kind::precondition, "invariant distributions need n >= 2");
  const phase_point a = start_point(m, c.cfg);
  const hyperbolicity_options h = hyper_options(c.cfg);
  const double W = c.cfg.horizon.value_or(3.0);
  c.result["start"] = point_json(a);
  c.result["invariance_window"] = W;

  std::vector<double> s_values;
  const int steps = static_cast<int>(std::ceil(2.0 * W / 0.5 - 1e-9));
  for (int i = 0; i <= steps; ++i) s_values.push_back(-W + 2.0 * W * i / steps);

  csv_table t;
  t.header = {"s", "residual_plus", "residual_minus"};
  std::vector<std::vector<double>> residuals;
  std::vector<invariant_distribution> dists;
  bool all_converged = true;
  for (int sign : {1, -1}) {
    invariant_distribution d;
    try {
      d = build_invariant_distribution(sys, a, sign, h);
    } catch (const hamlab_error& e) {
      if (e.kind() != error_kind::inconsistency) throw;
      // A non-monotone horizon family: conjugate points are the usual cause.
      const conjugate_report scan = conjugate_scan(sys, a, h.first_horizon, true, h);
      if (scan.points.empty()) throw;
      c.result["message"] = std::string(e.what()) + "; conjugate point at t = " +
                            std::to_string(scan.points.front().time) + ", horizon limits do not exist";
      c.code = exit_hypothesis;
      return;
    }
    json j;
    j["converged"] = d.converged;
    j["U"] = to_json(d.U);
    j["limit_gap"] = d.limit_gap;
    j["construction_horizon"] = d.construction_horizon;
    j["horizons"] = d.horizons;
    j["lambda_angle"] = d.lambda_angle;
    j["isotropy_residual"] = d.isotropy_residual;
    j["dH_residual"] = d.dH_residual;
    j["field_residual"] = d.field_residual;
    std::vector<double> res;
    if (d.converged) {
      res = invariance_residuals(sys, d, s_values, h);
      j["max_invariance_residual"] = *std::max_element(res.begin(), res.end());
    } else {
      res.assign(s_values.size(), std::numeric_limits<double>::quiet_NaN());
      j["max_invariance_residual"] = nullptr;
      all_converged = false;
    }
    residuals.push_back(res);
    c.result[sign > 0 ? "plus" : "minus"] = j;
    dists.push_back(d);
  }
  const Mat cp = reduced_coordinates(sys, a.coords, dists[0].E, dists[0].F, dists[0].reduced_basis);
  const Mat cm = reduced_coordinates(sys, a.coords, dists[1].E, dists[1].F, dists[1].reduced_basis);
  c.result["splitting_angle"] = smallest_principal_angle(cp, cm);
  for (std::size_t i = 0; i < s_values.size(); ++i) t.add({s_values[i], residuals[0][i], residuals[1][i]});
  write_table(c, "distributions.csv", t);
  if (!all_converged) {
    c.result["message"] = "a horizon limit did not converge within the largest horizon";
    c.code = exit_failure;
  }
}

// ------------------------------------------------------------------- anosov

void cmd_anosov(context& c) {
  const model m = load_model(c.cfg);
  const phase_system& sys = m.system;
  const hyperbolicity_options h = hyper_options(c.cfg);
  const double T = c.cfg.horizon.value_or(c.cfg.fit_window);
  const std::vector<phase_point> pts = draw_points(m, c.cfg);
  c.result["fit_window"] = T;
  c.result["samples"] = c.cfg.samples;

  const anosov_verdict v = anosov_diagnose(sys, pts, T, h);
  c.result["status"] = to_string(v.status);
  c.result["c2"] = v.c2;
  c.result["c1"] = v.c1;
  c.result["min_splitting_angle"] = v.min_splitting_angle;
  c.result["criteria_used"] = v.criteria_used;
  c.result["witness"] = v.witness;
  c.result["note"] = v.note;

  bool conjugate_failure = false;
  csv_table t;
  t.header = {"sample", "converged", "splitting_angle", "intersection_dim", "rate_plus", "rate_minus", "c1",
              "bounded_horizontal", "transversal", "intersection_ok", "rates_ok"};
  json samples = json::array();
  for (std::size_t i = 0; i < v.samples.size(); ++i) {
    const anosov_sample& s = v.samples[i];
    json j = {{"base", point_json(s.base)},
              {"converged", s.converged},
              {"splitting_angle", s.splitting_angle},
              {"intersection_dim", s.intersection_dim},
              {"rate_plus", s.rate_plus},
              {"rate_minus", s.rate_minus},
              {"c1", s.c1},
              {"bounded_horizontal", s.bounded_horizontal},
              {"transversal", s.transversal},
              {"intersection_ok", s.intersection_ok},
              {"rates_ok", s.rates_ok}};
    if (!s.failure.empty()) j["failure"] = s.failure;
    if (s.failure.find("conjugate") != std::string::npos) conjugate_failure = true;
    samples.push_back(j);
    t.add({double(i), double(s.converged), s.splitting_angle, double(s.intersection_dim), s.rate_plus, s.rate_minus,
           s.c1, s.bounded_horizontal, double(s.transversal), double(s.intersection_ok), double(s.rates_ok)});
  }
  c.result["per_sample"] = samples;
  write_table(c, "anosov_samples.csv", t);

  bool nonpositive_violated = false;
  if (sys.n >= 2) {
    const phase_point a = c.cfg.start ? start_point(m, c.cfg) : pts.front();
    const nonpositive_report np = nonpositive_criterion(sys, a, T, h);
    nonpositive_violated = np.hypothesis_violated;
    json j = {{"base", point_json(a)},
              {"hypothesis_violated", np.hypothesis_violated},
              {"max_curvature", np.max_curvature},
              {"min_curvature", np.min_curvature},
              {"fires", np.fires},
              {"negative_time", np.negative_time ? json(*np.negative_time) : json(nullptr)},
              {"intersection_dim", np.intersection_dim},
              {"drift_angle", np.drift_angle},
              {"status", to_string(np.status)}};
    c.result["nonpositive"] = j;

    Vec w = Vec::Zero(2 * (sys.n - 1));
    w(sys.n - 1) = 1.0;  // the horizontal frame vector f~_1
    const growth_profile g = horizontal_growth_profile(sys, a, w, T, h);
    c.result["growth"] = {{"monotone", g.monotone}, {"hypothesis_violated", g.hypothesis_violated}};
    csv_table gt;
    gt.header = {"t", "horizontal_norm"};
    for (std::size_t k = 0; k < g.times.size(); ++k) gt.add({g.times[k], g.norms[k]});
    write_table(c, "growth.csv", gt);
  } else {
    c.result["nonpositive"] = nullptr;
  }

  if (v.status == anosov_status::inconclusive && (sys.n < 2 || conjugate_failure || nonpositive_violated)) {
    c.result["message"] = "hypotheses of the criteria fail on this model";
    c.code = exit_hypothesis;
  }
}

// ------------------------------------------------------------------ entropy

json estimate_json(const estimate& e) {
  return {{"mean", e.mean}, {"stderr", e.std_error}, {"used", e.used}, {"discarded", e.discarded}};
}

void cmd_entropy(context& c) {
  const model m = load_model(c.cfg);
  const hyperbolicity_options h = hyper_options(c.cfg);
  sampler_options so;
  so.seed = c.cfg.seed;
  so.samples = c.cfg.samples;
  so.threads = static_cast<unsigned>(c.cfg.threads);
  lyapunov_options lo;
  lo.horizon = c.cfg.horizon.value_or(12.0);
  lo.burn = c.cfg.burn;
  lo.interval = c.cfg.interval;
  c.result["window"] = {{"burn", lo.burn}, {"horizon", lo.horizon}, {"interval", lo.interval}};
  c.result["samples"] = so.samples;

  const ergodic_report r = entropy_bounds(m, so, h, lo);
  c.result["entropy_estimate"] = r.entropy_estimate;
  c.result["entropy_stderr"] = r.entropy_stderr;
  c.result["bound1"] = r.bound1 ? json(*r.bound1) : json(nullptr);
  c.result["bound2"] = r.bound2;
  c.result["bound1_holds"] = r.bound1_holds;
  c.result["bound2_holds"] = r.bound2_holds;
  c.result["reduced_trace"] = estimate_json(r.reduced_trace);
  c.result["eigen_spread"] = estimate_json(r.eigen_spread);
  c.result["eigenvalues"] = {{"min", r.min_eigenvalue}, {"max", r.max_eigenvalue}};
  c.result["lyapunov"] = {{"riccati", estimate_json(r.lyapunov.riccati)},
                          {"qr", estimate_json(r.lyapunov.qr)},
                          {"gap", r.lyapunov.gap},
                          {"tolerance", r.lyapunov.tolerance},
                          {"consistent", r.lyapunov.consistent}};
  c.result["notes"] = r.notes;

  const total_curvature_report tc = total_curvature_check(m, so, c.cfg.scan_horizon, h);
  c.result["total_curvature"] = {{"applicable", tc.applicable},
                                 {"pass", tc.pass},
                                 {"mean", tc.trace.mean},
                                 {"stderr", tc.trace.std_error},
                                 {"max_abs", tc.max_abs ? json(*tc.max_abs) : json(nullptr)},
                                 {"note", tc.note}};

  csv_table t;
  t.header = {"index", "reduced_trace", "eigen_spread", "tr_U_minus", "qr_growth"};
  const std::vector<const estimate*> cols = {&r.reduced_trace, &r.eigen_spread, &r.lyapunov.riccati,
                                             &r.lyapunov.qr};
  std::size_t rows = 0;
  for (const estimate* e : cols) rows = std::max(rows, e->per_sample.size());
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> row{double(i)};
    for (const estimate* e : cols)
      row.push_back(i < e->per_sample.size() ? e->per_sample[i] : std::numeric_limits<double>::quiet_NaN());
    t.add(std::move(row));
  }
  write_table(c, "entropy_samples.csv", t);

  if (!tc.applicable || !r.bound1) {
    c.result["message"] = "hypotheses of the entropy bounds or of the total-curvature sign fail on this model";
    c.code = exit_hypothesis;
  }
}

// -------------------------------------------------------------- riccati-lab

void cmd_riccati(context& c) {
  if (!c.cfg.riccati) fail(error_kind::config, "riccati-lab needs a [riccati] table");
  const riccati_spec& spec = *c.cfg.riccati;
  riccati_problem p = riccati_problem::constant(spec.curvature);
  p.k = spec.k;
  p.K1 = spec.K1;
  p.K2 = spec.K2;
  riccati_integration ri;
  if (c.cfg.tol) ri.rtol = *c.cfg.tol;
  const double t0 = spec.t0, T = c.cfg.horizon.value_or(5.0);
  std::vector<double> grid = uniform_grid(T, c.cfg.spacing);
  for (double& t : grid) t += t0;
  p.verify_bounds(t0, t0 + T);
  const int mdim = p.m;
  c.result["m"] = mdim;
  c.result["curvature"] = to_json(spec.curvature);
  c.result["t0"] = t0;
  c.result["t1"] = t0 + T;

  csv_table t;
  t.header = {"t"};
  for (auto& s : matrix_columns("S", mdim, mdim)) t.header.push_back(s);
  riccati_solution sol;
  std::optional<fundamental_solution> fund;
  if (spec.s0) {
    c.result["initial"] = "S(t0) given";
    sol = solve_riccati(p, *spec.s0, grid, t0, ri);
  } else {
    c.result["initial"] = "B(t0) = 0, B'(t0) = I";
    fund = solve_linear(p, Mat::Zero(mdim, mdim), Mat::Identity(mdim, mdim), grid, t0, ri);
    sol = riccati_from_fundamental(p, *fund);
    c.result["singular_times"] = fund->singular_times;
    c.result["wronskian_drift"] = fund->wronskian_drift;
    t.header.push_back("det_B");
  }
  c.result["residual"] = sol.residual;
  c.result["asymmetry"] = sol.asymmetry;

  // Closed forms for a scalar constant curvature started from B(t0) = 0.
  if (mdim == 1 && !spec.s0) {
    const double r = spec.curvature(0, 0);
    double err = 0.0;
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
      const double u = sol.times[k] - t0;
      if (sol.S[k].size() == 0 || u < 0.1) continue;
      double exact;
      if (r < 0.0)
        exact = std::sqrt(-r) / std::tanh(std::sqrt(-r) * u);
      else if (r == 0.0)
        exact = 1.0 / u;
      else {
        const double w = std::sqrt(r) * u;
        if (std::abs(std::sin(w)) < 0.05) continue;
        exact = std::sqrt(r) * std::cos(w) / std::sin(w);
      }
      err = std::max(err, std::abs(sol.S[k](0, 0) - exact));
    }
    c.result["closed_form_error"] = err;
  }

  std::optional<limit_solution> up, um;
  if (spec.limits) {
    limit_options lo;
    if (c.cfg.tol) lo.tol = *c.cfg.tol;
    const std::vector<double> lg = uniform_grid(T, c.cfg.spacing);
    lo.first_horizon = std::max(lo.first_horizon, 2.0 * T);
    up = limit_riccati(p, limit_direction::plus, lg, lo, ri);
    um = limit_riccati(p, limit_direction::minus, lg, lo, ri);
    auto lim = [](const limit_solution& l) {
      json j = {{"converged", l.converged}, {"gap", l.convergence_gap}, {"horizons", l.horizons},
                {"U_at_0", to_json(l.U.front())}, {"monotone_violation", l.monotone_violation}};
      if (l.bound_violation) j["bound_violation"] = *l.bound_violation;
      if (l.envelope_violation) j["envelope_violation"] = *l.envelope_violation;
      return j;
    };
    c.result["limits"] = {{"grid_origin", 0.0}, {"plus", lim(*up)}, {"minus", lim(*um)}};
    for (auto& s : matrix_columns("Uplus", mdim, mdim)) t.header.push_back(s);
    for (auto& s : matrix_columns("Uminus", mdim, mdim)) t.header.push_back(s);
    if (!up->converged || !um->converged) c.code = exit_failure;
  }

  // One row per grid node; S is missing where B(t) is singular.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::size_t j = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<double> row{grid[k]};
    while (j < sol.times.size() && sol.times[j] < grid[k]) ++j;
    if (j < sol.times.size() && sol.times[j] == grid[k] && sol.S[j].size() > 0)
      append_matrix(row, sol.S[j]);
    else
      row.insert(row.end(), static_cast<std::size_t>(mdim * mdim), nan);
    if (fund) row.push_back(fund->det_B[k]);
    if (up) {
      append_matrix(row, up->U[k]);
      append_matrix(row, um->U[k]);
    }
    t.add(std::move(row));
  }
  write_table(c, "riccati.csv", t);
}

// ----------------------------------------------------------------- validate

struct check {
  std::string name;
  double threshold;
  double worst = 0.0;
  int evaluated = 0;
  void see(double v) {
    worst = std::max(worst, v);
    ++evaluated;
  }
  bool pass() const { return worst < threshold; }
};

void cmd_validate(context& c) {
  const model m = load_model(c.cfg);
  const phase_system& sys = m.system;
  const hyperbolicity_options h = hyper_options(c.cfg);
  const double T = c.cfg.horizon.value_or(10.0);
  run_config ten = c.cfg;
  ten.samples = std::max(10, c.cfg.samples);
  const std::vector<phase_point> pts = draw_points(m, ten);

  check energy{"sample_energy", 1e-9}, flow_check{"flow_oracle", 1e-6}, mono_check{"monodromy_oracle", 1e-6},
      methods{"frame_vs_bracket", 1e-5}, curv{"reduced_curvature_oracle", 1e-5},
      conj{"conjugate_times_oracle", 1e-4}, formula{"reduction_formula", 1e-5};
  csv_table t;
  t.header = {"sample", "energy_error", "flow_error", "monodromy_error", "min_form_eig", "method_gap",
              "curvature_error", "conjugate_error", "formula_mismatch"};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double min_form_eig = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const phase_point& a = pts[i];
    std::vector<double> row(t.header.size(), nan);
    row[0] = double(i);
    row[1] = std::abs(a.energy - m.energy);
    energy.see(row[1]);

    if (m.oracles.exact_flow) {
      flow_options fo = h.flow;
      fo.allow_handoff = false;
      const flow_segment seg = flow_on_grid(sys, a, {0.0, 0.5, 1.0, 2.0}, m.oracles.exact_monodromy != nullptr, fo);
      double fe = 0.0, me = 0.0;
      for (std::size_t k = 0; k < seg.times.size(); ++k) {
        if (seg.truncated && !(seg.times[k] < seg.exit_time)) continue;
        const Vec z = m.oracles.exact_flow(a.coords, seg.times[k]);
        fe = std::max(fe, (seg.states[k].coords - z).cwiseAbs().maxCoeff() / std::max(1.0, z.cwiseAbs().maxCoeff()));
        if (m.oracles.exact_monodromy) {
          const Mat mo = m.oracles.exact_monodromy(a.coords, seg.times[k]);
          me = std::max(me, max_abs(seg.monodromies[k] - mo) / std::max(1.0, max_abs(mo)));
        }
      }
      row[2] = fe;
      flow_check.see(fe);
      if (m.oracles.exact_monodromy) {
        row[3] = me;
        mono_check.see(me);
      }
    }

    row[4] = min_eigenvalue(monotone_form(sys, a).matrix);
    min_form_eig = std::min(min_form_eig, row[4]);

    const Mat rf = curvature_operator(sys, a, curvature_method::frame, h.jacobi).R;
    const Mat rb = curvature_operator(sys, a, curvature_method::bracket, h.jacobi).R;
    row[5] = max_abs(rf - rb);
    methods.see(row[5]);

    if (sys.n >= 2) {
      const reduced_formula_report f = reduced_curvature_via_formula(sys, a, h.jacobi);
      row[8] = f.mismatch;
      formula.see(f.mismatch);
      std::optional<double> expected;
      if (m.oracles.reduced_curvature)
        expected = *m.oracles.reduced_curvature;
      else if (m.oracles.gauss_curvature && sys.n == 2)
        expected = 2.0 * m.energy * m.oracles.gauss_curvature(a.coords.head(2));
      if (expected) {
        row[6] = max_abs(f.R_direct - *expected * Mat::Identity(f.R_direct.rows(), f.R_direct.cols()));
        curv.see(row[6]);
      }
      if (m.oracles.conjugate_spacing && i < 3) {
        const conjugate_report scan = conjugate_scan(sys, a, T, true, h);
        const double d = *m.oracles.conjugate_spacing;
        std::size_t expected_count = 0;
        while ((expected_count + 1) * d <= T - 1e-9) ++expected_count;
        double e = scan.points.size() == expected_count ? 0.0 : std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < std::min(expected_count, scan.points.size()); ++k)
          e = std::max(e, std::abs(scan.points[k].time - (k + 1) * d));
        row[7] = e;
        conj.see(e);
      }
    }
    t.add(std::move(row));
  }
  json checks = json::array();
  bool ok = min_form_eig > 0.0;
  checks.push_back({{"name", "monotone_form_min_eig"},
                    {"evaluated", pts.size()},
                    {"worst", min_form_eig},
                    {"threshold", 0.0},
                    {"pass", ok}});
  for (const check* k : {&energy, &flow_check, &mono_check, &methods, &formula, &curv, &conj}) {
    if (k->evaluated == 0) continue;
    ok = ok && k->pass();
    checks.push_back({{"name", k->name},
                      {"evaluated", k->evaluated},
                      {"worst", k->worst},
                      {"threshold", k->threshold},
                      {"pass", k->pass()}});
  }
  c.result["samples"] = pts.size();
  c.result["checks"] = checks;
  c.result["all_pass"] = ok;
  write_table(c, "validate.csv", t);
  if (!ok) c.code = exit_failure;
}

const char* status_for(int code) {
  switch (code) {
    case exit_ok:
      return "completed";
    case exit_hypothesis:
      return "hypothesis_violation";
    default:
      return "numerical_failure";
  }
}

}  // namespace

command_outcome run_command(const run_config& cfg, const json& overrides) {
  command_outcome out;
  json& rep = out.report;
  rep["schema_version"] = schema_version;
  rep["command"] = cfg.command;
  rep["status"] = nullptr;
  rep["exit_code"] = nullptr;
  rep["provenance"] = {{"version", version_string},
                       {"config_sha256", sha256_hex(cfg.text)},
                       {"seed", cfg.seed},
                       {"overrides", overrides},
                       {"timestamp", utc_timestamp()}};
  const hyperbolicity_options h = hyper_options(cfg);
  riccati_integration ri;
  if (cfg.command == "riccati-lab" && cfg.tol) ri.rtol = *cfg.tol;
  rep["tolerances"] = tolerances_json(h, ri, cfg);
  json result = json::object();
  context c{cfg, out, result};
  try {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) fail(error_kind::io, "cannot create output directory " + cfg.out_dir + ": " + ec.message());
    if (!cfg.model.empty()) {
      const model m = instantiate(cfg.model, cfg.params);
      json params = json::object();
      for (const auto& [k, v] : m.params) params[k] = v;
      rep["model"] = {{"name", m.name}, {"params", params}, {"energy", m.energy}, {"chart", m.chart_description}};
    }
    if (cfg.command == "curvature")
      cmd_curvature(c);
    else if (cfg.command == "conjugate")
      cmd_conjugate(c);
    else if (cfg.command == "distributions")
      cmd_distributions(c);
    else if (cfg.command == "anosov")
      cmd_anosov(c);
    else if (cfg.command == "entropy")
      cmd_entropy(c);
    else if (cfg.command == "riccati-lab")
      cmd_riccati(c);
    else if (cfg.command == "validate")
      cmd_validate(c);
    else
      fail(error_kind::config, "unknown command '" + cfg.command + "'");
    out.code = c.code;
  } catch (const hamlab_error& e) {
    const bool hypothesis = e.kind() == error_kind::conjugate_point || e.kind() == error_kind::precondition;
    out.code = hypothesis ? exit_hypothesis : exit_failure;
    rep["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
  } catch (const std::exception& e) {
    out.code = exit_failure;
    rep["error"] = {{"kind", "internal"}, {"message", e.what()}};
  }
  rep["status"] = status_for(out.code);
  rep["exit_code"] = out.code;
  rep["result"] = result;
  rep["artifacts"] = out.files;
  const std::string name = cfg.command.empty() ? "report" : cfg.command;
  try {
    write_json((fs::path(cfg.out_dir) / (name + ".json")).string(), rep);
  } catch (const hamlab_error& e) {
    out.code = exit_failure;
    out.report["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
  }
  return out;
}

}  // namespace hamlab::app
