#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sublab {

/// Shortest decimal form that reads back to the same double; "nan", "inf"
/// and "-inf" for non-finite values.
std::string format_number(double v);

/// Writes text to path, creating parent directories. Throws Error on I/O
/// failure.
void write_text(const std::filesystem::path& path, const std::string& text);

std::string read_text(const std::filesystem::path& path);

/// Comma-separated table with a header row.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(const std::vector<double>& row);
  std::string str() const;
  void write(const std::filesystem::path& path) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

}  // namespace sublab
