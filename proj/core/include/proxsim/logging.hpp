/// CSV run logs.  Values are formatted once on append (%.12g, timestamps with
/// 6 decimals) and the parsed-back double is stored alongside, so metrics
/// computed in memory are bit-equal to metrics recomputed from the written
/// files.
#pragma once

#include <string>
#include <vector>

namespace proxsim {

struct CsvCell {
  std::string text;
  double value{0.0};
  bool numeric{false};
};

CsvCell csv_time(double t);     // fixed 6-decimal seconds
CsvCell csv_num(double v);      // %.12g
CsvCell csv_int(long v);
CsvCell csv_text(std::string s);

class CsvTable {
 public:
  CsvTable() = default;
  CsvTable(std::string name, std::vector<std::string> columns);

  void append(std::vector<CsvCell> row);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& columns() const { return columns_; }
  size_t rows() const { return rows_.size(); }
  const std::vector<CsvCell>& row(size_t i) const { return rows_[i]; }
  double num(size_t row, size_t col) const { return rows_[row][col].value; }
  const std::string& text(size_t row, size_t col) const { return rows_[row][col].text; }
  int column_index(const std::string& name) const;  // -1 when absent

  void write_file(const std::string& path, const std::string& header_comment) const;
  std::string serialize(const std::string& header_comment) const;

  /// Parse a file written by write_file (comments skipped, numeric cells
  /// re-parsed).  Throws std::runtime_error on malformed input.
  static CsvTable read_file(const std::string& path);

 private:
  std::string name_;
  std::vector<std::string> columns_;
  std::vector<std::vector<CsvCell>> rows_;
};

/// The four per-run logs.
struct RunLogs {
  CsvTable truth{"truth",
                 {"t_s", "x_m", "y_m", "heading_rad", "vx_body_mps", "vy_body_mps",
                  "rate_radps"}};
  CsvTable estimate{"estimate",
                    {"t_s", "x_m", "y_m", "vx_body_mps", "vy_body_mps", "heading_rad",
                     "attitude_source", "var_x_m2", "var_y_m2", "var_vx_m2s2",
                     "var_vy_m2s2", "err_x_m", "err_y_m", "err_vx_mps", "err_vy_mps"}};
  CsvTable measurements{"measurements",
                        {"t_s", "sensor", "id", "v0", "v1", "v2", "accepted",
                         "mahalanobis_sq", "beta", "truth_outlier"}};
  CsvTable phases{"phases", {"t_s", "phase"}};

  /// schema_version comment plus stable scenario identification.
  std::string header_comment;

  void write_all(const std::string& out_dir) const;
};

}  // namespace proxsim
