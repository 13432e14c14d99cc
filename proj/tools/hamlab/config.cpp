#include "hamlab/config.hpp"

#include "hamlab/error.hpp"

#include <toml.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace hamlab::app {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(error_kind::config, where + ": " + what);
}

void only_keys(const toml::table& t, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : t) {
    const std::string key(k.str());
    if (!allowed.count(key)) bad(where, "unknown key '" + key + "'");
  }
}

const toml::table& sub_table(const toml::node& n, const std::string& where) {
  if (!n.is_table()) bad(where, "expected a table");
  return *n.as_table();
}

double number(const toml::node& n, const std::string& where) {
  if (auto v = n.value<double>(); v && (n.is_floating_point() || n.is_integer())) return *v;
  bad(where, "expected a number");
}

std::int64_t integer(const toml::node& n, const std::string& where) {
  if (!n.is_integer()) bad(where, "expected an integer");
  return *n.value<std::int64_t>();
}

bool boolean(const toml::node& n, const std::string& where) {
  if (!n.is_boolean()) bad(where, "expected true or false");
  return *n.value<bool>();
}

std::string string(const toml::node& n, const std::string& where) {
  if (!n.is_string()) bad(where, "expected a string");
  return *n.value<std::string>();
}

Vec vector(const toml::node& n, const std::string& where) {
  if (!n.is_array()) bad(where, "expected an array of numbers");
  const toml::array& a = *n.as_array();
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(a[i], where);
  return v;
}

// A number (1 x 1) or an array of equally long rows.
Mat matrix(const toml::node& n, const std::string& where) {
  if (n.is_integer() || n.is_floating_point()) return Mat::Constant(1, 1, number(n, where));
  if (!n.is_array() || n.as_array()->empty()) bad(where, "expected a number or an array of rows");
  const toml::array& rows = *n.as_array();
  const auto r = static_cast<Eigen::Index>(rows.size());
  Mat m;
  for (Eigen::Index i = 0; i < r; ++i) {
    const Vec row = vector(rows[static_cast<std::size_t>(i)], where);
    if (i == 0) m.resize(r, row.size());
    if (row.size() != m.cols()) bad(where, "rows of different lengths");
    m.row(i) = row.transpose();
  }
  return m;
}

}  // namespace

run_config parse_config(const std::string& text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    fail(error_kind::config, os.str());
  }
  run_config c;
  c.path = source;
  c.text = text;
  only_keys(root, source, {"command", "seed", "model", "start", "run", "riccati", "output"});

  if (auto* n = root.get("command")) {
    c.command = string(*n, "command");
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), c.command) == names.end()) bad("command", "unknown command '" + c.command + "'");
  }
  if (auto* n = root.get("seed")) {
    const std::int64_t s = integer(*n, "seed");
    if (s < 0) bad("seed", "must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }

  if (auto* n = root.get("model")) {
    for (const auto& [k, v] : sub_table(*n, "model")) {
      const std::string key(k.str());
      if (key == "name")
        c.model = string(v, "model.name");
      else
        c.params[key] = number(v, "model." + key);
    }
  }

  if (auto* n = root.get("start")) {
    const toml::table& t = sub_table(*n, "start");
    only_keys(t, "start", {"coords", "chart", "x", "angle"});
    start_spec s;
    if (auto* v = t.get("coords")) s.coords = vector(*v, "start.coords");
    if (auto* v = t.get("chart")) s.chart = static_cast<int>(integer(*v, "start.chart"));
    if (auto* v = t.get("x")) s.x = vector(*v, "start.x");
    if (auto* v = t.get("angle")) s.angle = number(*v, "start.angle");
    if (s.coords.has_value() == s.x.has_value()) bad("start", "give exactly one of 'coords' and 'x'");
    c.start = s;
  }

  if (auto* n = root.get("run")) {
    const toml::table& t = sub_table(*n, "run");
    only_keys(t, "run", {"horizon", "tol", "spacing", "samples", "threads", "reduced", "fit_window", "burn",
                         "interval", "scan_horizon"});
    if (auto* v = t.get("horizon")) c.horizon = number(*v, "run.horizon");
    if (auto* v = t.get("tol")) c.tol = number(*v, "run.tol");
    if (auto* v = t.get("spacing")) c.spacing = number(*v, "run.spacing");
    if (auto* v = t.get("samples")) c.samples = static_cast<int>(integer(*v, "run.samples"));
    if (auto* v = t.get("threads")) c.threads = static_cast<int>(integer(*v, "run.threads"));
    if (auto* v = t.get("reduced")) c.reduced = boolean(*v, "run.reduced");
    if (auto* v = t.get("fit_window")) c.fit_window = number(*v, "run.fit_window");
    if (auto* v = t.get("burn")) c.burn = number(*v, "run.burn");
    if (auto* v = t.get("interval")) c.interval = number(*v, "run.interval");
    if (auto* v = t.get("scan_horizon")) c.scan_horizon = number(*v, "run.scan_horizon");
  }

  if (auto* n = root.get("riccati")) {
    const toml::table& t = sub_table(*n, "riccati");
    only_keys(t, "riccati", {"curvature", "s0", "t0", "k", "K1", "K2", "limits"});
    riccati_spec r;
    auto* cur = t.get("curvature");
    if (!cur) bad("riccati", "missing 'curvature'");
    r.curvature = matrix(*cur, "riccati.curvature");
    if (r.curvature.rows() != r.curvature.cols()) bad("riccati.curvature", "must be square");
    if (auto* v = t.get("s0")) {
      r.s0 = matrix(*v, "riccati.s0");
      if (r.s0->rows() != r.curvature.rows() || r.s0->cols() != r.curvature.cols())
        bad("riccati.s0", "must have the shape of the curvature");
    }
    if (auto* v = t.get("t0")) r.t0 = number(*v, "riccati.t0");
    if (auto* v = t.get("k")) r.k = number(*v, "riccati.k");
    if (auto* v = t.get("K1")) r.K1 = number(*v, "riccati.K1");
    if (auto* v = t.get("K2")) r.K2 = number(*v, "riccati.K2");
    if (auto* v = t.get("limits")) r.limits = boolean(*v, "riccati.limits");
    c.riccati = r;
  }

  if (auto* n = root.get("output")) {
    const toml::table& t = sub_table(*n, "output");
    only_keys(t, "output", {"dir", "csv"});
    if (auto* v = t.get("dir")) c.out_dir = string(*v, "output.dir");
    if (auto* v = t.get("csv")) c.csv = boolean(*v, "output.csv");
  }

  if (c.samples < 1) bad("run.samples", "must be at least 1");
  if (c.threads < 0) bad("run.threads", "must be non-negative");
  if (!(c.spacing > 0.0)) bad("run.spacing", "must be positive");
  if (c.tol && !(*c.tol > 0.0)) bad("run.tol", "must be positive");
  if (c.horizon && !(*c.horizon > 0.0)) bad("run.horizon", "must be positive");
  return c;
}

run_config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(error_kind::io, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace hamlab::app
