#include "lengen/csv.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace lengen::report {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Splits one logical record; quoted fields may span lines.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field");
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

void write_csv(std::ostream& out, const Table& t) {
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << quote(cells[i]);
    out << '\n';
  };
  line(t.columns);
  for (const auto& r : t.rows) {
    if (r.size() != t.columns.size()) throw std::invalid_argument("csv: row width differs from header");
    line(r);
  }
}

void export_csv(const Table& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("csv: cannot write " + path.string());
  write_csv(out, table);
  if (!out) throw std::runtime_error("csv: write failed for " + path.string());
}

Table parse_csv(std::istream& in) {
  Table t;
  std::vector<std::string> fields;
  if (!read_record(in, fields)) return t;
  t.columns = fields;
  while (read_record(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != t.columns.size()) throw std::runtime_error("csv: row width differs from header");
    t.rows.push_back(fields);
  }
  return t;
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("csv: cannot open " + path.string());
  return parse_csv(in);
}

Table MetricsTable::to_table() const {
  Table t({"checkpoint", "bucket", "metric", "value", "count"});
  for (const auto& r : rows) t.add(r.checkpoint, r.bucket, r.metric, r.value, r.count);
  return t;
}

MetricsTable MetricsTable::from_table(const Table& t) {
  if (t.columns != std::vector<std::string>{"checkpoint", "bucket", "metric", "value", "count"}) {
    throw std::runtime_error("csv: not a metrics table");
  }
  MetricsTable m;
  for (const auto& r : t.rows) m.rows.push_back({r[0], r[1], r[2], std::stod(r[3]), std::stoll(r[4])});
  return m;
}

const MetricsRow& MetricsTable::find(const std::string& checkpoint, const std::string& bucket,
                                     const std::string& metric) const {
  for (const auto& r : rows) {
    if (r.checkpoint == checkpoint && r.bucket == bucket && r.metric == metric) return r;
  }
  throw std::out_of_range("metrics: no row " + checkpoint + "/" + bucket + "/" + metric);
}

}  // namespace lengen::report
