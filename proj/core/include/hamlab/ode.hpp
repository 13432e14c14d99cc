#pragma once

#include "hamlab/linalg.hpp"

#include <functional>
#include <limits>

namespace hamlab::ode {

using rhs_fn = std::function<void(double t, const Vec& y, Vec& dydt)>;

struct options {
  double rtol = 1e-12;
  double atol = 1e-14;
  double h_initial = 0.0;  // 0 selects the starting step automatically
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 20'000'000;
  // Optional extra per-component tolerance computed from the current state,
  // e.g. a roundoff floor for badly scaled variational blocks.
  std::function<void(const Vec& y, Vec& floor)> tolerance_floor;
};

// Dormand-Prince 8(5,3) with the 7th-order dense output of Hairer, Norsett & Wanner.
class dop853 {
 public:
  dop853(rhs_fn f, options opt);

  void reset(double t, const Vec& y);

  // One accepted step that never passes t_limit. Landing exactly on t_limit
  // is guaranteed when the step is clipped.
  void step_towards(double t_limit);

  // Advance with repeated steps until t == t_target.
  void advance_to(double t_target);

  double t() const { return t_; }
  double t_previous() const { return t_old_; }
  const Vec& y() const { return y_; }
  const Vec& y_previous() const { return y_old_; }
  double last_step() const { return t_ - t_old_; }

  // Dense output on [t_previous, t].
  Vec interpolate(double t);

  long accepted_steps() const { return accepted_; }
  long rejected_steps() const { return rejected_; }
  long evaluations() const { return evaluations_; }

 private:
  double initial_step(double direction);
  void stages(double h);
  void prepare_dense();
  void update_floor();

  rhs_fn f_;
  options opt_;
  long n_ = 0;
  double t_ = 0, t_old_ = 0;
  double h_ = 0;
  double fac_old_ = 1e-4;
  bool last_rejected_ = false;
  bool dense_ready_ = false;
  Vec y_, y_old_, k1_, k1_old_, y_new_, k2_, k3_, k4_, k5_, k6_, k7_, k8_, k9_, k10_, k13_, tmp_;
  Vec floor_;
  Vec r1_, r2_, r3_, r4_, r5_, r6_, r7_, r8_;
  long accepted_ = 0, rejected_ = 0, evaluations_ = 0;
};

}  // namespace hamlab::ode
