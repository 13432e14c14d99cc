#pragma once

#include "hamlab/linalg.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace hamlab::app {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

std::string sha256_hex(const std::string& bytes);
std::string utc_timestamp();

json to_json(const Vec& v);
json to_json(const Mat& m);
// Non-finite values become null.
json number(double x);

struct csv_table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
};

// Column names for the entries of a square matrix series, row-major: prefix_ij.
std::vector<std::string> matrix_columns(const std::string& prefix, Eigen::Index rows, Eigen::Index cols);
void append_matrix(std::vector<double>& row, const Mat& m);

void write_csv(const std::string& path, const csv_table& t);
void write_json(const std::string& path, const json& j);

}  // namespace hamlab::app
