// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "generators.hpp"

#include "hamlab/entropy.hpp"
#include "hamlab/hyperbolicity.hpp"
#include "hamlab/jacobi.hpp"
#include "hamlab/models.hpp"
#include "hamlab/reduction.hpp"
#include "hamlab/riccati.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace hamlab;
namespace fs = std::filesystem;

namespace {

struct outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed checks so that a FAIL line says what went wrong.
class ledger {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  outcome done(const std::string& summary) const {
    outcome o;
    o.pass = failures_.empty();
    o.detail = summary;
    for (std::size_t i = 0; i < failures_.size() && i < 3; ++i) o.detail += "; " + failures_[i];
    if (failures_.size() > 3) o.detail += "; ... (" + std::to_string(failures_.size()) + " failures)";
    return o;
  }

 private:
  std::vector<std::string> failures_;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

double riccati_reference(double r, double t) {
  if (r < 0) return 1.0 / std::tanh(t);
  if (r == 0) return 1.0 / t;
  return std::cos(t) / std::sin(t);
}

outcome riccati_closed_forms() {
  ledger l;
  double worst = 0.0;
  for (double r : {-1.0, 0.0, 1.0}) {
    const riccati_problem p = riccati_problem::constant(Mat::Constant(1, 1, r));
    const riccati_solution s =
        riccati_from_fundamental(p, solve_linear(p, Mat::Zero(1, 1), Mat::Identity(1, 1), uniform_grid(5.0, 0.05)));
    double err = 0.0;
    for (std::size_t i = 0; i < s.times.size(); ++i) {
      const double t = s.times[i];
      if (t < 0.1 - 1e-12) continue;
      err = std::max(err, std::abs(s.S[i](0, 0) - riccati_reference(r, t)));
    }
    worst = std::max(worst, err);
    l.check(err < 1e-6, "R=" + fmt(r) + " error " + fmt(err));
  }
  return l.done("max error " + fmt(worst));
}

std::function<Mat(double)> psd_path(testgen::gen& g, int m) {
  const double scale = g.uniform(0.1, 2.0);
  const Mat b0 = g.matrix(m, m), b1 = g.matrix(m, m);
  const double w = g.uniform(0.0, 2.0);
  const bool frozen = g.unit() < 0.3;
  return [=](double t) {
    const Mat b = frozen ? b0 : Mat(b0 + std::sin(w * t) * b1);
    return Mat(scale * b * b.transpose() / double(m));
  };
}

outcome comparison_pairs() {
  ledger l;
  testgen::gen g(2024);
  double worst_f = 1e300, worst_b = 1e300;
  for (int k = 0; k < 200; ++k) {
    const int m = g.integer(1, 4);
    const auto P = psd_path(g, m);
    const auto Q = psd_path(g, m);
    riccati_problem p1, p2;
    p1.m = p2.m = m;
    p1.curvature = [P](double t) { return Mat(-P(t)); };
    p2.curvature = [P, Q](double t) { return Mat(-P(t) - Q(t)); };
    const double t0 = g.uniform(-3.0, 3.0);

    const Mat s0 = g.psd(m, g.uniform(0.0, 3.0));
    std::vector<double> fwd, bwd;
    for (double t : uniform_grid(5.0, 0.05)) fwd.push_back(t0 + t);
    for (double t : uniform_grid(-5.0, 0.05)) bwd.push_back(t0 + t);
    std::sort(bwd.begin(), bwd.end());
    const comparison_report f = comparison_check(p1, p2, s0, s0, fwd);
    l.check(f.accepted, "pair " + std::to_string(k) + " rejected: " + f.reason);
    if (f.accepted) {
      worst_f = std::min(worst_f, f.worst);
      l.check(f.worst >= -1e-8, "pair " + std::to_string(k) + " forward " + fmt(f.worst));
    }
    const Mat n0 = -g.psd(m, g.uniform(0.0, 3.0));
    const comparison_report b = comparison_check(p1, p2, n0, n0, bwd, true);
    l.check(b.accepted, "pair " + std::to_string(k) + " backward rejected: " + b.reason);
    if (b.accepted) {
      worst_b = std::min(worst_b, b.worst);
      l.check(b.worst >= -1e-8, "pair " + std::to_string(k) + " backward " + fmt(b.worst));
    }
  }
  return l.done("200 pairs, worst min-eig forward " + fmt(worst_f) + ", backward " + fmt(worst_b));
}

outcome frame_suite() {
  ledger l;
  double darboux = 0.0, gauge = 0.0;
  for (const auto& name : model_names()) {
    const model m = instantiate(name);
    testgen::gen g(300);
    for (int k = 0; k < 3; ++k) {
      const phase_point a = g.point(m);
      const int n = m.system.n;
      const jacobi_curve_sample c = jacobi_curve(m.system, a, uniform_grid(10.0, 0.5));
      const canonical_frame_result f1 = canonical_frame(m.system, c);
      darboux = std::max(darboux, f1.max_darboux_residual);
      l.check(f1.max_darboux_residual < 1e-8, name + " Darboux " + fmt(f1.max_darboux_residual));
      if (n == 2) {
        const reduced_frame_result r = reduced_jacobi_frame(m.system, a, uniform_grid(10.0, 0.5));
        darboux = std::max(darboux, r.max_darboux_residual);
        l.check(r.max_darboux_residual < 1e-8, name + " reduced Darboux " + fmt(r.max_darboux_residual));
      }
      jacobi_options mixed;
      mixed.basis_mixing = g.orthogonal(n) * (g.matrix(n, n) + 2.0 * Mat::Identity(n, n));
      const canonical_frame_result f2 = canonical_frame(m.system, c, mixed);
      const Mat o0 = f1.E[0].colPivHouseholderQr().solve(f2.E[0]);
      double dev = max_abs(o0.transpose() * o0 - Mat::Identity(n, n));
      for (std::size_t i = 0; i < f1.times.size(); ++i)
        dev = std::max(dev, max_abs(f1.E[i].colPivHouseholderQr().solve(f2.E[i]) - o0));
      gauge = std::max(gauge, dev);
      l.check(dev < 1e-6, name + " gauge " + fmt(dev));
    }
  }
  return l.done("10 models, Darboux " + fmt(darboux) + ", gauge " + fmt(gauge));
}

outcome curvature_methods() {
  ledger l;
  double worst = 0.0;
  for (const auto& name : model_names()) {
    const model m = instantiate(name);
    testgen::gen g(400);
    for (int k = 0; k < 20; ++k) {
      const phase_point a = g.point(m);
      const double d = max_abs(curvature_operator(m.system, a, curvature_method::frame).R -
                               curvature_operator(m.system, a, curvature_method::bracket).R);
      worst = std::max(worst, d);
      l.check(d < 1e-5, name + " " + fmt(d));
    }
  }
  return l.done("200 points, max difference " + fmt(worst));
}

outcome reduction_cross_check() {
  ledger l;
  double worst = 0.0, lowest = 1e300, magnetic_omega = 0.0;
  for (const auto& name : model_names()) {
    const model m = instantiate(name);
    if (m.system.n < 2) continue;
    testgen::gen g(500);
    for (int k = 0; k < 10; ++k) {
      const phase_point a = g.point(m);
      const reduced_formula_report f = reduced_curvature_via_formula(m.system, a);
      worst = std::max(worst, f.mismatch);
      l.check(f.mismatch < 1e-5, name + " mismatch " + fmt(f.mismatch));
      if (name == "flat_magnetic") magnetic_omega = std::max(magnetic_omega, f.omega_bar.norm());
      for (int j = 0; j < 3; ++j) {
        const Vec w = g.vector(1);
        const quadratic_identity_report q = quadratic_identity(m.system, a, w);
        lowest = std::min(lowest, q.reduced - q.full);
        l.check(q.reduced - q.full >= -1e-9, name + " reduced - full " + fmt(q.reduced - q.full));
      }
    }
  }
  l.check(magnetic_omega > 0.1, "flat_magnetic omega_bar vanished");
  return l.done("max mismatch " + fmt(worst) + ", min reduced - full " + fmt(lowest) + ", |omega_bar| on flat_magnetic " +
                fmt(magnetic_omega));
}

outcome conjugate_points() {
  ledger l;
  const double pi = 3.14159265358979323846;
  double worst = 0.0;
  const model sph = instantiate("sphere_geodesic");
  testgen::gen g(600);
  for (int k = 0; k < 5; ++k) {
    const conjugate_report r = conjugate_scan(sph.system, g.point(sph), 10.0);
    l.check(r.points.size() == 3, "sphere found " + std::to_string(r.points.size()) + " points");
    for (std::size_t j = 0; j < r.points.size() && j < 3; ++j) {
      const double e = std::abs(r.points[j].time - (j + 1) * pi);
      worst = std::max(worst, e);
      l.check(e < 1e-4, "sphere k=" + std::to_string(j + 1) + " error " + fmt(e));
    }
  }
  for (const std::string name : {"flat_torus_geodesic", "hyperbolic_plane_geodesic"}) {
    const model m = instantiate(name);
    for (int k = 0; k < 3; ++k) {
      const conjugate_report r = conjugate_scan(m.system, g.point(m), 50.0);
      l.check(r.points.empty(), name + " reported " + std::to_string(r.points.size()) + " points");
    }
  }
  return l.done("sphere max |t_k - k pi| " + fmt(worst) + "; torus and hyperbolic plane clean to T=50");
}

outcome invariant_distributions() {
  ledger l;
  double gap = 0.0, inv = 0.0, props = 0.0;
  std::vector<double> s_values;
  for (int i = -12; i <= 12; ++i)
    if (i != 0) s_values.push_back(0.25 * i);
  for (const std::string name : {"hyperbolic_plane_geodesic", "flat_torus_geodesic"}) {
    const model m = instantiate(name);
    testgen::gen g(700);
    for (int k = 0; k < 3; ++k) {
      const phase_point a = g.point(m);
      for (int sign : {1, -1}) {
        const invariant_distribution d = build_invariant_distribution(m.system, a, sign);
        l.check(d.converged, name + " limit did not converge");
        gap = std::max(gap, d.limit_gap);
        l.check(d.limit_gap < 1e-6, name + " limit gap " + fmt(d.limit_gap));
        const std::vector<double> r = invariance_residuals(m.system, d, s_values);
        const double worst = *std::max_element(r.begin(), r.end());
        inv = std::max(inv, worst);
        l.check(worst < 1e-4, name + " invariance " + fmt(worst));
        const double p = std::max({d.isotropy_residual, d.dH_residual, d.field_residual});
        props = std::max(props, p);
        l.check(p < 1e-8, name + " structure " + fmt(p));
        l.check(d.lambda_angle > 1e-3, name + " touches the vertical");
      }
    }
  }
  return l.done("limit gap " + fmt(gap) + ", invariance " + fmt(inv) + ", isotropy/level/field " + fmt(props));
}

outcome anosov_verdicts() {
  ledger l;
  testgen::gen g(800);
  const model hyp = instantiate("hyperbolic_plane_geodesic");
  const anosov_verdict h = anosov_diagnose(hyp.system, {g.point(hyp), g.point(hyp), g.point(hyp), g.point(hyp)}, 8.0);
  l.check(h.status == anosov_status::anosov, std::string("hyperbolic plane ") + to_string(h.status));
  l.check(std::abs(h.c2 - 1.0) <= 0.02, "hyperbolic c2 " + fmt(h.c2));
  l.check(h.criteria_used.size() == 3, "criteria used " + std::to_string(h.criteria_used.size()));
  for (const auto& s : h.samples) l.check(s.transversal && s.intersection_ok && s.rates_ok, "criteria disagree");

  const model torus = instantiate("flat_torus_geodesic");
  const anosov_verdict t = anosov_diagnose(torus.system, {g.point(torus), g.point(torus)}, 8.0);
  l.check(t.status == anosov_status::not_anosov, std::string("torus ") + to_string(t.status));
  l.check(!t.witness.empty(), "torus without witness");
  for (const auto& s : t.samples) l.check(s.intersection_dim == 2 || !s.transversal, "torus splitting not degenerate");

  const model pert = instantiate("perturbed_hyperbolic");
  std::vector<phase_point> pts;
  double kmin = 1e300, kmax = -1e300;
  for (int k = 0; k < 4; ++k) {
    pts.push_back(g.point(pert));
    const flow_segment seg = flow(pert.system, pts.back(), 8.0);
    for (const auto& z : seg.states) {
      const double K = pert.oracles.gauss_curvature(z.coords.head(2));
      kmin = std::min(kmin, K);
      kmax = std::max(kmax, K);
    }
  }
  l.check(kmin >= -1.5 && kmax <= -0.5, "perturbed curvature range [" + fmt(kmin) + ", " + fmt(kmax) + "]");
  const anosov_verdict p = anosov_diagnose(pert.system, pts, 8.0);
  l.check(p.status == anosov_status::anosov, std::string("perturbed ") + to_string(p.status));
  l.check(p.c2 >= 0.45, "perturbed c2 " + fmt(p.c2));
  return l.done("hyperbolic c2 " + fmt(h.c2) + ", torus " + to_string(t.status) + ", perturbed c2 " + fmt(p.c2) +
                " with K in [" + fmt(kmin) + ", " + fmt(kmax) + "]");
}

// Closest approach to the bump centre, from an independent flow.
double closest_approach(const model& m, const phase_point& a, double T) {
  flow_options o;
  o.node_spacing = 0.01;
  const flow_segment seg = flow(m.system, a, T, o);
  double r = 1e300;
  for (const auto& z : seg.states) r = std::min(r, z.coords.head(2).norm());
  return r;
}

outcome nonpositive() {
  ledger l;
  const model bump = instantiate("curvature_bump");
  int fired = 0, crossing = 0, abstained = 0, missing = 0;
  // y = 0.9 is deflected before it reaches the disk
  for (double y : {0.0, 0.2, 0.5, -0.7, 0.9, 1.5, 2.5, -3.0}) {
    const phase_point a = bump.point_from(v2(-4.0, y), 0.0);
    const bool crosses = closest_approach(bump, a, 8.0) < 1.0;
    const nonpositive_report r = nonpositive_criterion(bump.system, a, 8.0);
    l.check(!r.hypothesis_violated, "bump hypothesis at y=" + fmt(y));
    if (crosses) {
      ++crossing;
      fired += r.fires;
      l.check(r.fires, "did not fire through the bump at y=" + fmt(y));
    } else {
      ++missing;
      abstained += !r.fires;
      l.check(!r.fires, "fired away from the bump at y=" + fmt(y));
    }
  }
  l.check(crossing >= 3 && missing >= 3, "trajectory mix " + std::to_string(crossing) + "/" + std::to_string(missing));
  const model torus = instantiate("flat_torus_geodesic");
  testgen::gen g(900);
  const nonpositive_report t = nonpositive_criterion(torus.system, g.point(torus), 8.0);
  l.check(t.status == anosov_status::not_anosov, std::string("torus ") + to_string(t.status));
  l.check(t.intersection_dim == 1, "torus intersection dim " + std::to_string(t.intersection_dim));
  return l.done("bump fired " + std::to_string(fired) + "/" + std::to_string(crossing) + " crossing, abstained " +
                std::to_string(abstained) + "/" + std::to_string(missing) + " missing; torus " + to_string(t.status) +
                " with dim " + std::to_string(t.intersection_dim));
}

outcome entropy_suite() {
  ledger l;
  sampler_options o;
  o.samples = 16;
  o.seed = 10;
  const ergodic_report h = entropy_bounds(instantiate("hyperbolic_plane_geodesic"), o);
  l.check(std::abs(h.entropy_estimate - 1.0) <= 0.02, "hyperbolic estimate " + fmt(h.entropy_estimate));
  l.check(h.bound1 && std::abs(*h.bound1 - 1.0) <= 0.01, "hyperbolic bound1");
  l.check(std::abs(h.bound2 - 1.0) <= 0.01, "hyperbolic bound2 " + fmt(h.bound2));

  const ergodic_report t = entropy_bounds(instantiate("flat_torus_geodesic"), o);
  // same tolerances as the constant-curvature case; bound1 is a square root,
  // so curvature noise of 1e-12 already shows up as 1e-6
  l.check(std::abs(t.entropy_estimate) <= 0.02, "torus estimate " + fmt(t.entropy_estimate));
  l.check(t.bound1 && std::abs(*t.bound1) <= 0.01, "torus bound1");
  l.check(std::abs(t.bound2 - 0.5) <= 0.01, "torus bound2 " + fmt(t.bound2));

  std::string totals;
  for (const std::string name :
       {"flat_torus_geodesic", "hyperbolic_plane_geodesic", "perturbed_hyperbolic", "hyperbolic_magnetic"}) {
    const total_curvature_report c = total_curvature_check(instantiate(name), o);
    l.check(c.applicable, name + " has conjugate points");
    l.check(c.pass && c.trace.mean <= 2.0 * c.trace.std_error + 1e-12, name + " mean " + fmt(c.trace.mean));
    totals += " " + fmt(c.trace.mean);
  }
  return l.done("hyperbolic h=" + fmt(h.entropy_estimate) + " b1=" + fmt(h.bound1.value_or(NAN)) + " b2=" +
                fmt(h.bound2) + "; torus h=" + fmt(t.entropy_estimate) + " b1=" + fmt(t.bound1.value_or(NAN)) +
                " b2=" + fmt(t.bound2) +
                "; mean reduced curvature" + totals);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI and returns its report without the timestamp.
nlohmann::json cli_report(const std::string& command, const fs::path& config, const fs::path& out,
                          const std::string& extra) {
  fs::remove_all(out);
  const std::string cmd = std::string("\"") + HAMLAB_CLI_PATH + "\" " + command + " --config \"" + config.string() +
                          "\" --out \"" + out.string() + "\" " + extra + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  (void)rc;  // exit codes 1 and 2 still write a report
  nlohmann::json j = nlohmann::json::parse(slurp(out / (command + ".json")));
  j["provenance"].erase("timestamp");
  return j;
}

outcome determinism() {
  ledger l;
  const fs::path out = fs::temp_directory_path() / "hamlab_acceptance_determinism";
  int runs = 0;
  for (const auto& entry : fs::directory_iterator(HAMLAB_CONFIG_DIR)) {
    if (entry.path().extension() != ".toml") continue;
    const std::string text = slurp(entry.path());
    const auto at = text.find("command = \"");
    if (at == std::string::npos) continue;
    const auto from = at + 11;
    const std::string command = text.substr(from, text.find('"', from) - from);
    for (const std::string extra : {"", "--seed 4242"}) {
      try {
        const nlohmann::json a = cli_report(command, entry.path(), out, extra);
        const nlohmann::json b = cli_report(command, entry.path(), out, extra);
        l.check(a == b, entry.path().filename().string() + " " + extra + " differs");
        ++runs;
      } catch (const std::exception& e) {
        l.check(false, entry.path().filename().string() + ": " + e.what());
      }
    }
  }
  l.check(runs >= 8, "only " + std::to_string(runs) + " configurations ran");
  fs::remove_all(out);
  return l.done(std::to_string(runs) + " repeated runs identical modulo timestamp");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<outcome()>>> criteria = {
      {"Riccati closed forms", riccati_closed_forms},
      {"comparison on random pairs", comparison_pairs},
      {"Darboux and gauge suite", frame_suite},
      {"curvature method agreement", curvature_methods},
      {"reduction cross-check", reduction_cross_check},
      {"conjugate points", conjugate_points},
      {"invariant distributions", invariant_distributions},
      {"Anosov verdicts", anosov_verdicts},
      {"non-positive criterion", nonpositive},
      {"entropy suite", entropy_suite},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << (i + 1) << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
  return failed ? 1 : 0;
}
