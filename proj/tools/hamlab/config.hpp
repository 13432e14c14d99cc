#pragma once

#include "hamlab/linalg.hpp"
#include "hamlab/models.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hamlab::app {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"curvature", "conjugate", "distributions", "anosov",
                                                 "entropy",   "riccati-lab", "validate"};
  return names;
}

struct start_spec {
  std::optional<Vec> coords;
  int chart = 0;
  std::optional<Vec> x;  // configuration point, with `angle` (n = 2) or the sign of p (n = 1)
  double angle = 0.0;
};

struct riccati_spec {
  Mat curvature;            // constant R
  std::optional<Mat> s0;    // initial S; when absent B(t0) = 0, B'(t0) = I
  double t0 = 0.0;
  std::optional<double> k, K1, K2;
  bool limits = false;      // also compute U+ and U- on [t0, t1]
};

struct run_config {
  std::string path;
  std::string text;  // file contents, hashed for provenance
  std::string command;
  std::uint64_t seed = 1;

  std::string model;
  param_map params;
  std::optional<start_spec> start;

  std::optional<double> horizon;
  std::optional<double> tol;
  double spacing = 0.05;
  int samples = 8;
  int threads = 0;
  bool reduced = true;
  double fit_window = 8.0;
  double burn = 3.0;
  double interval = 0.25;
  double scan_horizon = 10.0;

  std::optional<riccati_spec> riccati;

  std::string out_dir = ".";
  bool csv = true;
};

// Reads and validates a TOML file; unknown keys and ill-typed values raise
// config errors naming the offending key.
run_config load_config(const std::string& path);
run_config parse_config(const std::string& text, const std::string& source);

}  // namespace hamlab::app
