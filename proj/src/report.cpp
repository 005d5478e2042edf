#include "lbhx/report.hpp"

#include <sys/utsname.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include "lbhx/error.hpp"

namespace lbhx {

void BenchReport::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw ContractViolation("report row has " + std::to_string(row.size()) + " cells for " +
                            std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

void BenchReport::add_meta(std::string key, std::string value) { meta.emplace_back(std::move(key), std::move(value)); }

const std::string* BenchReport::find_meta(std::string_view key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

int BenchReport::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

const Cell& BenchReport::at(std::size_t row, std::string_view col) const {
  const int c = column(col);
  if (c < 0) throw ContractViolation("report has no column '" + std::string(col) + "'");
  return rows.at(row).at(c);
}

double BenchReport::number(std::size_t row, std::string_view col) const {
  const Cell& c = at(row, col);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  throw ContractViolation("report cell '" + std::string(col) + "' is not numeric");
}

namespace {

bool parses_as_number(std::string_view s) {
  if (s.empty()) return false;
  double d = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line, std::vector<bool>& quoted) {
  std::vector<std::string> out;
  quoted.clear();
  std::string cur;
  bool in_q = false;
  bool was_q = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_q) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_q = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      in_q = true;
      was_q = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      quoted.push_back(was_q);
      cur.clear();
      was_q = false;
    } else {
      cur += ch;
    }
  }
  if (in_q) throw ParseError("unterminated quote in CSV line");
  out.push_back(std::move(cur));
  quoted.push_back(was_q);
  return out;
}

Cell parse_cell(const std::string& s, bool quoted) {
  if (quoted) return s;
  std::int64_t i = 0;
  if (const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
      ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) {
    return i;
  }
  double d = 0.0;
  if (const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
      ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) {
    return d;
  }
  return s;
}

}  // namespace

std::string format_cell(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), *d);
    std::string s(buf, ptr);
    // keep doubles distinguishable from integers on re-parse
    if (std::isfinite(*d) && s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
  }
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") != std::string::npos || parses_as_number(s) || s.empty()) return quote(s);
  return s;
}

std::string BenchReport::to_csv() const {
  std::ostringstream out;
  for (const auto& [k, v] : meta) out << "# " << k << ": " << v << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_cell(row[i]);
    out << "\n";
  }
  return out.str();
}

BenchReport BenchReport::parse_csv(std::string_view text) {
  BenchReport r;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  int lineno = 0;
  std::vector<bool> quoted;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ", 2);
      if (colon == std::string::npos) {
        r.add_meta(line.substr(2), "");
      } else {
        r.add_meta(line.substr(2, colon - 2), line.substr(colon + 2));
      }
      continue;
    }
    if (!header) {
      r.columns = split_csv_line(line, quoted);
      header = true;
      continue;
    }
    const auto fields = split_csv_line(line, quoted);
    if (fields.size() != r.columns.size()) {
      throw ParseError("report line " + std::to_string(lineno) + ": " + std::to_string(fields.size()) +
                       " fields for " + std::to_string(r.columns.size()) + " columns");
    }
    std::vector<Cell> row;
    for (std::size_t i = 0; i < fields.size(); ++i) row.push_back(parse_cell(fields[i], quoted[i]));
    r.rows.push_back(std::move(row));
  }
  if (!header) throw ParseError("report has no header line");
  return r;
}

std::vector<std::pair<std::string, std::string>> machine_fingerprint(const PoolConfig& pools) {
  std::vector<std::pair<std::string, std::string>> out;
  utsname u{};
  if (uname(&u) == 0) {
    out.emplace_back("host", u.nodename);
    out.emplace_back("os", std::string(u.sysname) + " " + u.release + " " + u.machine);
  }
  out.emplace_back("cores", std::to_string(std::thread::hardware_concurrency()));
  const long pages = sysconf(_SC_PHYS_PAGES);
  const long page = sysconf(_SC_PAGE_SIZE);
  if (pages > 0 && page > 0) {
    out.emplace_back("memory_gib", std::to_string(static_cast<double>(pages) * page / (1u << 30)));
  }
  out.emplace_back("compiler", __VERSION__);
  std::ostringstream p;
  p << "host_workers=" << pools.host_workers << " device_workers=" << pools.device_workers
    << " device_throttle=" << pools.device_throttle;
  out.emplace_back("pools", p.str());
  out.emplace_back("note", "desk-scale emulation; the accelerator is a throttled worker pool");
  return out;
}

void add_standard_meta(BenchReport& r, const std::string& experiment, const SimulationConfig& cfg) {
  r.add_meta("experiment", experiment);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  r.add_meta("timestamp", stamp);
  for (auto& [k, v] : machine_fingerprint(cfg.pools)) r.add_meta("machine." + k, v);
  for (auto& [k, v] : config_echo(cfg)) r.add_meta("config." + k, v);
}

void write_report(const BenchReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFault("cannot write report '" + path + "'");
  out << r.to_csv();
}

}  // namespace lbhx
