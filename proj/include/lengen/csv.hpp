#pragma once

// Plain CSV tables with a header row. Doubles are written with 17
// significant digits so a parse of the file reproduces them exactly.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lengen::report {

std::string format_double(double v);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  explicit Table(std::vector<std::string> cols = {}) : columns(std::move(cols)) {}

  template <typename... Ts>
  void add(const Ts&... cells) {
    rows.push_back({cell(cells)...});
  }
  bool operator==(const Table&) const = default;

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return format_double(v); }
  template <typename T>
  static std::string cell(const T& v) {
    return std::to_string(v);
  }
};

void write_csv(std::ostream& out, const Table& table);
/// Throws std::runtime_error on I/O failure.
void export_csv(const Table& table, const std::filesystem::path& path);
Table parse_csv(std::istream& in);
Table read_csv(const std::filesystem::path& path);

struct MetricsRow {
  std::string checkpoint;
  std::string bucket;  // eval length or complexity bucket
  std::string metric;
  double value = 0.0;
  std::int64_t count = 0;

  bool operator==(const MetricsRow&) const = default;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;

  bool operator==(const MetricsTable&) const = default;
  Table to_table() const;
  static MetricsTable from_table(const Table& table);
  /// First row matching checkpoint, bucket and metric; throws if absent.
  const MetricsRow& find(const std::string& checkpoint, const std::string& bucket, const std::string& metric) const;
};

}  // namespace lengen::report
