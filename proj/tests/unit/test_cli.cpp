#include "hamlab/commands.hpp"
#include "hamlab/config.hpp"
#include "hamlab/error.hpp"
#include "hamlab/report.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hamlab;
using namespace hamlab::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hamlab_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "inline");
  } catch (const hamlab_error& e) {
    if (e.kind() == error_kind::config) return e.what();
    return "wrong kind";
  }
  return "";
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("SHA-256 of a known vector") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("non-finite numbers serialize as null") {
    CHECK(number(std::nan("")).is_null());
    CHECK(number(1.5).get<double>() == 1.5);
    const json m = to_json(Mat(Mat::Identity(2, 2)));
    CHECK(m.dump() == "[[1.0,0.0],[0.0,1.0]]");
  }

  TEST_CASE("CSV output round-trips doubles") {
    const fs::path dir = scratch_dir("csv");
    csv_table t;
    t.header = {"t", "value"};
    t.add({0.1, 1.0 / 3.0});
    write_csv((dir / "x.csv").string(), t);
    std::istringstream in(slurp(dir / "x.csv"));
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "t,value");
    const double back = std::stod(row.substr(row.find(',') + 1));
    CHECK(back == 1.0 / 3.0);
  }

  TEST_CASE("matrix column names are row-major") {
    const auto cols = matrix_columns("U", 2, 2);
    CHECK(cols == std::vector<std::string>{"U_00", "U_01", "U_10", "U_11"});
  }

  TEST_CASE("config parsing") {
    const run_config c = parse_config(R"(
command = "anosov"
seed = 9
[model]
name = "flat_magnetic"
b = 0.5
[start]
x = [0.1, 0.2]
angle = 1.0
[run]
samples = 3
fit_window = 6.0
)",
                                      "inline");
    CHECK(c.command == "anosov");
    CHECK(c.seed == 9);
    CHECK(c.model == "flat_magnetic");
    CHECK(c.params.at("b") == 0.5);
    REQUIRE(c.start.has_value());
    CHECK(c.start->x->size() == 2);
    CHECK(c.samples == 3);
    CHECK(c.fit_window == 6.0);
  }

  TEST_CASE("config errors name the offending key") {
    CHECK(config_error("command = \"anosov\"\n[run]\nsampels = 3\n").find("sampels") != std::string::npos);
    CHECK(config_error("command = \"fly\"\n").find("command") != std::string::npos);
    CHECK(config_error("command = \"anosov\"\nseed = -1\n").find("seed") != std::string::npos);
    CHECK(config_error("command = \"anosov\"\n[start]\nx = [0.0, 1.0]\ncoords = [0.0, 1.0, 1.0, 0.0]\n")
              .find("start") != std::string::npos);
    CHECK(config_error("command = \"anosov\"\n[run]\nhorizon = \"long\"\n").find("horizon") != std::string::npos);
  }

  TEST_CASE("riccati-lab reproduces cot") {
    run_config c = parse_config("command = \"riccati-lab\"\n[riccati]\ncurvature = [[1.0]]\n[run]\nhorizon = 3.0\n",
                                "inline");
    c.out_dir = scratch_dir("riccati").string();
    const command_outcome o = run_command(c, json::object());
    CHECK(o.code == exit_ok);
    CHECK(o.report["result"]["closed_form_error"].get<double>() < 1e-8);
    CHECK(fs::exists(fs::path(c.out_dir) / "riccati-lab.json"));
    CHECK(fs::exists(fs::path(c.out_dir) / "riccati.csv"));
    CHECK(o.report["schema_version"] == schema_version);
    CHECK(o.report["provenance"]["config_sha256"].get<std::string>().size() == 64);
    CHECK(o.report.contains("tolerances"));
  }

  TEST_CASE("conjugate command on the sphere") {
    run_config c = parse_config(
        "command = \"conjugate\"\n[model]\nname = \"sphere_geodesic\"\n[start]\nx = [0.2, -0.1]\nangle = 0.7\n"
        "[run]\nhorizon = 10.0\n",
        "inline");
    c.out_dir = scratch_dir("conjugate").string();
    const command_outcome o = run_command(c, json::object());
    CHECK(o.code == exit_ok);
    const json& pts = o.report["result"]["points"];
    REQUIRE(pts.size() == 3);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(pts[k]["time"].get<double>() - (k + 1) * M_PI) < 1e-4);
    const std::string csv = slurp(fs::path(c.out_dir) / "conjugate.csv");
    CHECK(csv.rfind("t,det_B", 0) == 0);
  }

  TEST_CASE("hypothesis violations exit with 2") {
    run_config c = parse_config(
        "command = \"anosov\"\n[model]\nname = \"sphere_geodesic\"\n[run]\nsamples = 2\nfit_window = 4.0\n", "inline");
    c.out_dir = scratch_dir("anosov_sphere").string();
    const command_outcome o = run_command(c, json::object());
    CHECK(o.code == exit_hypothesis);
    CHECK(o.report["status"] == "hypothesis_violation");
  }

  TEST_CASE("bad model parameters exit with 1 and keep a report") {
    run_config c = parse_config("command = \"curvature\"\n[model]\nname = \"sphere_geodesic\"\nK = -2.0\n", "inline");
    c.out_dir = scratch_dir("bad_model").string();
    const command_outcome o = run_command(c, json::object());
    CHECK(o.code == exit_failure);
    CHECK_FALSE(o.report["error"].is_null());
  }

  TEST_CASE("overrides are recorded") {
    run_config c = parse_config("command = \"riccati-lab\"\n[riccati]\ncurvature = [[0.0]]\n", "inline");
    c.out_dir = scratch_dir("overrides").string();
    c.horizon = 2.0;
    const command_outcome o = run_command(c, json{{"horizon", 2.0}});
    CHECK(o.report["provenance"]["overrides"]["horizon"] == 2.0);
    CHECK(o.report["result"]["t1"] == 2.0);
  }
}
