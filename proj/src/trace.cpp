#include "cosim/trace.hpp"

#include "cosim/error.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>

namespace cosim {

namespace {

void append_formatted(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

double parse_double(const std::string& field, const std::filesystem::path& path, std::size_t line) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw Error(ErrorCode::IoError,
                path.string() + ":" + std::to_string(line) + ": not a number: '" + field + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

} // namespace

ComparisonReport compare_traces(const Trace& a, const Trace& b, double tol) {
  if (a.num_rows() != b.num_rows())
    throw Error(ErrorCode::ShapeMismatch, "row counts differ: " + std::to_string(a.num_rows()) +
                                              " vs " + std::to_string(b.num_rows()));
  if (a.num_columns() != b.num_columns())
    throw Error(ErrorCode::ShapeMismatch, "column counts differ: " + std::to_string(a.num_columns()) +
                                              " vs " + std::to_string(b.num_columns()));
  for (std::size_t c = 0; c < a.columns.size(); ++c)
    if (a.columns[c] != b.columns[c])
      throw Error(ErrorCode::ShapeMismatch,
                  "column " + std::to_string(c) + " named '" + a.columns[c] + "' vs '" + b.columns[c] + "'");

  ComparisonReport report;
  report.tol = tol;
  report.pass = true;
  report.max_abs_diff.assign(a.num_columns() + 1, 0.0); // slot 0 is the time column

  auto consider = [&](std::size_t row, std::size_t col_slot, double va, double vb) {
    double d = std::fabs(va - vb);
    if (std::isnan(va) != std::isnan(vb)) d = std::numeric_limits<double>::infinity();
    if (d > report.max_abs_diff[col_slot]) report.max_abs_diff[col_slot] = d;
    if (report.pass && !(d <= tol)) {
      report.pass = false;
      report.first_row = row;
      report.first_column = col_slot;
      report.value_a = va;
      report.value_b = vb;
    }
  };

  for (std::size_t r = 0; r < a.num_rows(); ++r) {
    consider(r, 0, a.times[r], b.times[r]);
    for (std::size_t c = 0; c < a.num_columns(); ++c)
      consider(r, c + 1, a.rows[r][c], b.rows[r][c]);
  }
  return report;
}

void write_trace_csv(const Trace& trace, const std::filesystem::path& path) {
  std::string out = "t";
  for (const std::string& c : trace.columns) {
    out += ',';
    out += c;
  }
  out += '\n';
  for (std::size_t r = 0; r < trace.num_rows(); ++r) {
    append_formatted(out, trace.times[r]);
    for (double v : trace.rows[r]) {
      out += ',';
      append_formatted(out, v);
    }
    out += '\n';
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Trace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open: " + path.string());

  Trace trace;
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorCode::IoError, path.string() + ": empty file");
  std::vector<std::string> header = split_csv(line);
  if (header.empty() || header[0] != "t")
    throw Error(ErrorCode::IoError, path.string() + ": first column must be 't'");
  trace.columns.assign(header.begin() + 1, header.end());

  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv(line);
    if (fields.size() != header.size())
      throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(lineno) +
                                          ": expected " + std::to_string(header.size()) + " fields");
    trace.times.push_back(parse_double(fields[0], path, lineno));
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i)
      row.push_back(parse_double(fields[i], path, lineno));
    trace.rows.push_back(std::move(row));
  }
  if (trace.times.size() >= 2) trace.dt = trace.times[1] - trace.times[0];
  return trace;
}

} // namespace cosim
