#include "hamlab/commands.hpp"
#include "hamlab/config.hpp"
#include "hamlab/error.hpp"
#include "hamlab/version.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace hamlab::app;
  CLI::App app{"Jacobi curves, curvature and hyperbolicity diagnostics for Hamiltonian flows", "hamlab"};
  app.set_version_flag("--version", hamlab::version_string);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  double horizon = 0.0, tol = 0.0;
  for (const std::string& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " command");
    sub->add_option("--config", config_path, "TOML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "random seed (overrides seed)");
    sub->add_option("--horizon", horizon, "time horizon (overrides run.horizon)")->check(CLI::PositiveNumber);
    sub->add_option("--tol", tol, "tolerance (overrides run.tol)")->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();

  run_config cfg;
  try {
    cfg = load_config(config_path);
  } catch (const hamlab::hamlab_error& e) {
    std::cerr << "hamlab: " << e.what() << '\n';
    return exit_failure;
  }
  if (!cfg.command.empty() && cfg.command != sub->get_name()) {
    std::cerr << "hamlab: config declares command '" << cfg.command << "' but '" << sub->get_name()
              << "' was requested\n";
    return exit_failure;
  }
  cfg.command = sub->get_name();

  json overrides = json::object();
  if (sub->count("--out")) cfg.out_dir = out_dir;
  if (sub->count("--seed")) {
    cfg.seed = seed;
    overrides["seed"] = seed;
  }
  if (sub->count("--horizon")) {
    cfg.horizon = horizon;
    overrides["horizon"] = horizon;
  }
  if (sub->count("--tol")) {
    cfg.tol = tol;
    overrides["tol"] = tol;
  }

  const command_outcome out = run_command(cfg, overrides);
  const json& rep = out.report;
  std::cout << cfg.command << ": " << rep["status"].get<std::string>();
  if (rep.contains("error")) std::cout << " (" << rep["error"]["message"].get<std::string>() << ")";
  std::cout << "\nreport: " << cfg.out_dir << "/" << cfg.command << ".json\n";
  for (const std::string& f : out.files) std::cout << "series: " << cfg.out_dir << "/" << f << '\n';
  return out.code;
}
