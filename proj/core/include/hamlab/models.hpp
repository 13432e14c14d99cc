#pragma once

#include "hamlab/symplectic.hpp"

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hamlab {

using param_map = std::map<std::string, double>;

struct model_oracles {
  // Constant reduced curvature at the model energy, when it exists.
  std::optional<double> reduced_curvature;
  // Spacing of reduced conjugate times along every trajectory.
  std::optional<double> conjugate_spacing;
  std::function<Vec(const Vec&, double)> exact_flow;
  std::function<Mat(const Vec&, double)> exact_monodromy;
  // Gauss curvature of the configuration metric (surface models).
  std::function<double(const Vec&)> gauss_curvature;
};

struct model {
  std::string name;
  param_map params;
  phase_system system;
  double energy = 0.5;
  model_oracles oracles;
  std::string chart_description;
  // Draws a point on the energy level. `liouville_exact` tells whether the
  // draw follows the Liouville measure restricted to the sampling box.
  std::function<phase_point(std::mt19937_64&)> sample;
  bool liouville_exact = false;
  // Point on the level from configuration x and a direction angle (n = 2),
  // or from x and the sign of p (n = 1).
  std::function<phase_point(const Vec&, double)> point_from;
};

const std::vector<std::string>& model_names();

model instantiate(const std::string& name, const param_map& params = {});

}  // namespace hamlab
