#pragma once

#include "hamlab/hyperbolicity.hpp"
#include "hamlab/models.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hamlab {

enum class sampling_mode { level_set, trajectory };

struct sampler_options {
  sampling_mode mode = sampling_mode::level_set;
  std::uint64_t seed = 1;
  int samples = 32;
  double burn_in = 0.0;   // trajectory mode only
  double horizon = 0.0;   // trajectory mode: averaging window after burn_in
  double spacing = 1.0;   // trajectory mode: observation spacing
  int batches = 8;        // batch means for the standard error
  unsigned threads = 0;   // 0 = hardware concurrency
};

// Points of one sample: the level-set point itself, or the observation nodes
// of its trajectory after burn-in.
struct sample_path {
  phase_point start;  // the level-set draw
  std::vector<phase_point> points;
  bool discarded = false;  // left the chart during burn-in or the window
};

// Sample i is drawn from stream(seed, i), so results do not depend on threads.
std::vector<sample_path> draw_samples(const model& m, const sampler_options& opt);

// Observable on the energy level; nullopt excludes the point.
using observable = std::function<std::optional<double>(const phase_system&, const phase_point&)>;

struct estimate {
  double mean = 0.0;
  double std_error = 0.0;
  int used = 0;
  int discarded = 0;  // samples dropped (chart exit or excluded observable)
  std::vector<double> per_sample;
};

// Kahan-compensated mean over samples of per-sample time averages, with a
// batch-means standard error.
estimate birkhoff_average(const model& m, const sampler_options& opt, const observable& f);
estimate birkhoff_average(const model& m, const std::vector<sample_path>& paths, const sampler_options& opt,
                          const observable& f);

// Kahan sum and batch-means helpers, exposed for testing.
double kahan_sum(const std::vector<double>& v);
double batch_means_stderr(const std::vector<double>& v, int batches);

observable reduced_trace_observable(const jacobi_options& opt = {});
observable eigen_spread_observable(const jacobi_options& opt = {});  // sum |1 - lambda_i|
observable unstable_trace_observable(const hyperbolicity_options& opt = {});  // tr U-(0)

// Both sides of the Pesin comparison use the window [burn, horizon] of the
// trajectory through each level-set sample: the time average of tr U- on the
// nodes burn + k * interval, and the QR growth rate over the same window.
struct lyapunov_options {
  double horizon = 12.0;
  double burn = 3.0;
  double interval = 0.25;  // node spacing and QR renormalization
  double stderr_floor = 1e-3;
};

sampler_options window_sampler(const sampler_options& opt, const lyapunov_options& lopt);

struct lyapunov_report {
  estimate riccati;  // time average of tr U-
  estimate qr;       // sum of positive exponents on the reduced linearized flow
  double gap = 0.0;
  double tolerance = 0.0;  // 3 * max(stderr, floor)
  bool consistent = false;
};

lyapunov_report lyapunov_via_riccati(const model& m, const sampler_options& opt,
                                     const hyperbolicity_options& hopt = {}, const lyapunov_options& lopt = {});

// Growth rate of the vertical Jacobi fields over [burn, horizon], by QR on
// frame coordinates: the sum of the n-1 top exponents.
double qr_lyapunov_sum(const phase_system& sys, const phase_point& a, const lyapunov_options& lopt,
                       const jacobi_options& jopt = {});

struct ergodic_report {
  estimate reduced_trace;
  estimate eigen_spread;
  lyapunov_report lyapunov;
  double entropy_estimate = 0.0;
  double entropy_stderr = 0.0;
  std::optional<double> bound1;  // absent when the mean trace is positive
  double bound2 = 0.0;
  double min_eigenvalue = 0.0, max_eigenvalue = 0.0;
  bool bound1_holds = false, bound2_holds = false;
  std::vector<std::string> notes;
};

ergodic_report entropy_bounds(const model& m, const sampler_options& opt, const hyperbolicity_options& hopt = {},
                              const lyapunov_options& lopt = {});

struct total_curvature_report {
  bool applicable = true;  // false when a sampled trajectory has conjugate points
  std::string note;
  estimate trace;
  bool pass = false;
  std::optional<double> max_abs;  // reported in the equality case
};

total_curvature_report total_curvature_check(const model& m, const sampler_options& opt, double scan_horizon = 10.0,
                                             const hyperbolicity_options& hopt = {});

}  // namespace hamlab
