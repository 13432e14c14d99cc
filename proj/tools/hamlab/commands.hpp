#pragma once

#include "hamlab/config.hpp"
#include "hamlab/report.hpp"

#include <string>
#include <vector>

namespace hamlab::app {

enum exit_code : int { exit_ok = 0, exit_failure = 1, exit_hypothesis = 2 };

struct command_outcome {
  int code = exit_ok;
  json report;
  std::vector<std::string> files;  // written, relative to the output directory
};

// Runs `cfg.command`, writes <out>/<command>.json plus CSV series, and
// returns the exit code. Never throws for numerical or config failures; those
// end up in the report.
command_outcome run_command(const run_config& cfg, const json& overrides);

}  // namespace hamlab::app
