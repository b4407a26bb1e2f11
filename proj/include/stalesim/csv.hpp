#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stalesim {

/// Shortest decimal that parses back to exactly `v` ("nan", "inf", "-inf"
/// for non-finite values).
std::string format_double(double v);

/// Inverse of format_double. Throws std::invalid_argument on malformed text.
double parse_double(std::string_view text);

/// Minimal comma-separated table: one header row, no quoting (none of the
/// emitted fields contain commas).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
  std::vector<double> numeric_column(std::string_view name) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
std::string to_csv_string(const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text);

}  // namespace stalesim
