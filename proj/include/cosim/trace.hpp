#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace cosim {

/// Time-indexed record of selected signals. Row k has t = k*dt.
struct Trace {
  double dt = 0.0;
  std::vector<std::string> columns;
  std::vector<double> times;
  std::vector<std::vector<double>> rows;

  std::size_t num_rows() const { return rows.size(); }
  std::size_t num_columns() const { return columns.size(); }
};

struct ComparisonReport {
  bool pass = false;
  double tol = 0.0;
  std::vector<double> max_abs_diff; // per column
  // first cell exceeding tol (valid when !pass)
  std::size_t first_row = 0;
  std::size_t first_column = 0;
  double value_a = 0.0;
  double value_b = 0.0;
};

/// Cell-wise comparison including the time column. Throws ShapeMismatch when
/// row counts, column counts or column names differ.
ComparisonReport compare_traces(const Trace& a, const Trace& b, double tol);

/// CSV with a "t" first column and 17-significant-digit rendering, so doubles
/// round-trip bit-exactly through write/read.
void write_trace_csv(const Trace& trace, const std::filesystem::path& path);
Trace read_trace_csv(const std::filesystem::path& path);

} // namespace cosim
