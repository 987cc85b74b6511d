#include "proxsim/logging.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace proxsim {

CsvCell csv_time(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return {buf, std::strtod(buf, nullptr), true};
}

CsvCell csv_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return {buf, std::strtod(buf, nullptr), true};
}

CsvCell csv_int(long v) {
  return {std::to_string(v), static_cast<double>(v), true};
}

CsvCell csv_text(std::string s) { return {std::move(s), 0.0, false}; }

CsvTable::CsvTable(std::string name, std::vector<std::string> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {}

void CsvTable::append(std::vector<CsvCell> row) {
  if (row.size() != columns_.size())
    throw std::logic_error("CsvTable '" + name_ + "': row width mismatch");
  rows_.push_back(std::move(row));
}

int CsvTable::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return static_cast<int>(i);
  return -1;
}

std::string CsvTable::serialize(const std::string& header_comment) const {
  std::string out;
  out += "# schema_version=1\n";
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  for (size_t i = 0; i < columns_.size(); ++i) {
    out += columns_[i];
    out += (i + 1 < columns_.size()) ? ',' : '\n';
  }
  for (const auto& row : rows_) {
    for (size_t i = 0; i < row.size(); ++i) {
      out += row[i].text;
      out += (i + 1 < row.size()) ? ',' : '\n';
    }
  }
  return out;
}

void CsvTable::write_file(const std::string& path,
                          const std::string& header_comment) const {
  std::ofstream out(path, std::ios::binary);  // no platform newline translation
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << serialize(header_comment);
}

CsvTable CsvTable::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  CsvTable table;
  table.name_ = std::filesystem::path(path).stem().string();
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!have_header) {
      table.columns_ = fields;
      have_header = true;
      continue;
    }
    std::vector<CsvCell> row;
    row.reserve(fields.size());
    for (auto& f : fields) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      const bool numeric = end != f.c_str() && *end == '\0' && !f.empty();
      row.push_back({std::move(f), numeric ? v : 0.0, numeric});
    }
    if (row.size() != table.columns_.size())
      throw std::runtime_error("malformed CSV row in " + path);
    table.rows_.push_back(std::move(row));
  }
  if (!have_header) throw std::runtime_error("CSV without header: " + path);
  return table;
}

void RunLogs::write_all(const std::string& out_dir) const {
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  truth.write_file((dir / "truth.csv").string(), header_comment);
  estimate.write_file((dir / "estimate.csv").string(), header_comment);
  measurements.write_file((dir / "measurements.csv").string(), header_comment);
  phases.write_file((dir / "phases.csv").string(), header_comment);
}

}  // namespace proxsim
