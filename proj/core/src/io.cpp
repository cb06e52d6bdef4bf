#include "sublab/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sublab/error.hpp"

namespace sublab {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable::CsvTable(std::vector<std::string> header)
    : header_(std::move(header)) {}

void CsvTable::add_row(const std::vector<double>& row) {
  if (row.size() != header_.size()) {
    throw Error("csv row has " + std::to_string(row.size()) +
                " fields, header has " + std::to_string(header_.size()));
  }
  rows_.push_back(row);
}

std::string CsvTable::str() const {
  std::string s;
  for (std::size_t k = 0; k < header_.size(); ++k) {
    if (k) s += ',';
    s += header_[k];
  }
  s += '\n';
  for (const auto& row : rows_) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) s += ',';
      s += format_number(row[k]);
    }
    s += '\n';
  }
  return s;
}

void CsvTable::write(const std::filesystem::path& path) const {
  write_text(path, str());
}

}  // namespace sublab
