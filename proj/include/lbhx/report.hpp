#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lbhx/config.hpp"

namespace lbhx {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Tabular experiment output: "# key: value" metadata lines, a CSV header,
/// then rows. Doubles are written in shortest round-trip form, so parsing a
/// written report reproduces every cell exactly.
struct BenchReport {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  BenchReport() = default;
  explicit BenchReport(std::vector<std::string> cols) : columns(std::move(cols)) {}

  /// ContractViolation if the row width differs from the header.
  void add_row(std::vector<Cell> row);
  void add_meta(std::string key, std::string value);
  const std::string* find_meta(std::string_view key) const;
  int column(std::string_view name) const;  ///< -1 when absent
  const Cell& at(std::size_t row, std::string_view col) const;
  double number(std::size_t row, std::string_view col) const;

  std::string to_csv() const;
  static BenchReport parse_csv(std::string_view text);

  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

std::string format_cell(const Cell& c);

/// Host facts recorded in every report so local numbers are never mistaken
/// for another machine's.
std::vector<std::pair<std::string, std::string>> machine_fingerprint(const PoolConfig& pools);

/// Fingerprint, timestamp and config echo.
void add_standard_meta(BenchReport& r, const std::string& experiment, const SimulationConfig& cfg);

void write_report(const BenchReport& r, const std::string& path);

}  // namespace lbhx
