#include "hamlab/report.hpp"

#include "hamlab/error.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hamlab::app {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(error_kind::io, "SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

json to_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
  return a;
}

std::vector<std::string> matrix_columns(const std::string& prefix, Eigen::Index rows, Eigen::Index cols) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out.push_back(prefix + "_" + std::to_string(i) + std::to_string(j));
  return out;
}

void append_matrix(std::vector<double>& row, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
}

void write_csv(const std::string& path, const csv_table& t) {
  std::ofstream out(path);
  if (!out) fail(error_kind::io, "cannot write " + path);
  for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << '\n';
  char buf[40];
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) fail(error_kind::io, "write failed for " + path);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(error_kind::io, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) fail(error_kind::io, "write failed for " + path);
}

}  // namespace hamlab::app
