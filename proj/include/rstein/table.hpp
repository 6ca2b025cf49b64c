#pragma once

// Result tables with locale-independent CSV ('.' decimal, shortest round-trip
// digits, at most 17 significant) and JSON output. parse_csv(to_csv(t)) == t.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rstein/numeric.hpp"

namespace rstein {

inline constexpr const char* kArtifactVersion = "rstein-0.1.0";

using Cell = std::variant<std::int64_t, double, bool, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row) {
    require(row.size() == columns.size(), "Table: row width differs from the header");
    rows.push_back(std::move(row));
  }
  bool operator==(const Table&) const = default;
};

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  // Shortest representation that round-trips; never more than 17 digits.
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, res.ptr);
  // Keep doubles distinguishable from integers when read back.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline std::string format_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_double(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else return v;
      },
      c);
}

namespace detail {
inline std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// One CSV record into fields and whether each field was quoted.
inline std::vector<std::pair<std::string, bool>> split_csv_line(const std::string& line) {
  std::vector<std::pair<std::string, bool>> out;
  std::string cur;
  bool quoted = false, in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_quotes) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        in_quotes = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      in_quotes = quoted = true;
    } else if (ch == ',') {
      out.emplace_back(std::move(cur), quoted);
      cur.clear();
      quoted = false;
    } else {
      cur += ch;
    }
  }
  require(!in_quotes, "CSV: unterminated quoted field");
  out.emplace_back(std::move(cur), quoted);
  return out;
}
}  // namespace detail

inline Cell parse_cell(const std::string& s, bool quoted = false) {
  if (quoted) return s;
  if (s == "true") return true;
  if (s == "false") return false;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s.find_first_of(".eE") == std::string::npos) {
    std::int64_t i = 0;
    auto r = std::from_chars(first, last, i);
    if (r.ec == std::errc() && r.ptr == last) return i;
  } else if (!s.empty()) {
    double d = 0.0;
    auto r = std::from_chars(first, last, d);
    if (r.ec == std::errc() && r.ptr == last) return d;
  }
  return s;
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    out += (i ? "," : "") + detail::quote_csv(t.columns[i]);
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::string field = format_cell(row[i]);
      // Strings that would read back as another type are quoted.
      if (std::holds_alternative<std::string>(row[i]) &&
          !std::holds_alternative<std::string>(parse_cell(field)))
        field = "\"" + field + "\"";
      else
        field = detail::quote_csv(field);
      out += (i ? "," : "") + field;
    }
    out += '\n';
  }
  return out;
}

inline Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (header) {
      for (auto& [f, q] : fields) t.columns.push_back(f);
      header = false;
      continue;
    }
    std::vector<Cell> row;
    for (auto& [f, q] : fields) row.push_back(parse_cell(f, q));
    t.add_row(std::move(row));
  }
  return t;
}

inline nlohmann::json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          // JSON has no inf/nan; they travel as strings.
          if (!std::isfinite(v)) return format_double(v);
          return v;
        } else {
          return v;
        }
      },
      c);
}

inline nlohmann::json to_json(const Table& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rows.push_back(std::move(r));
  }
  return {{"columns", t.columns}, {"rows", rows}};
}

inline Table table_from_json(const nlohmann::json& j) {
  Table t;
  t.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    std::vector<Cell> row;
    for (const auto& c : r) {
      if (c.is_boolean()) row.emplace_back(c.get<bool>());
      else if (c.is_number_integer()) row.emplace_back(c.get<std::int64_t>());
      else if (c.is_number()) row.emplace_back(c.get<double>());
      else {
        const auto s = c.get<std::string>();
        const Cell parsed = parse_cell(s);
        if (std::holds_alternative<double>(parsed) && !std::isfinite(std::get<double>(parsed)))
          row.push_back(parsed);
        else
          row.emplace_back(s);
      }
    }
    t.add_row(std::move(row));
  }
  return t;
}

// Provenance attached to every stored result.
struct Provenance {
  std::uint64_t seed = 0;
  std::string config;  // canonical JSON dump of the run configuration
  std::string version = kArtifactVersion;

  std::string config_hash() const {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config);
    return s.str();
  }
  nlohmann::json to_json() const {
    return {{"seed", seed}, {"config_hash", config_hash()}, {"version", version},
            {"config", nlohmann::json::parse(config.empty() ? "{}" : config)}};
  }
};

// Appends a table to a CSV (rows prefixed with provenance columns) or to a
// JSON-lines file (one record per call).
inline void append_result(const std::string& path, const Table& t, const Provenance& prov,
                          bool json_lines) {
  if (json_lines) {
    std::ofstream out(path, std::ios::app);
    require(bool(out), "cannot open result store " + path);
    nlohmann::json rec = to_json(t);
    rec["provenance"] = prov.to_json();
    out << rec.dump() << '\n';
    return;
  }
  Table wide;
  wide.columns = {"seed", "config_hash", "version"};
  wide.columns.insert(wide.columns.end(), t.columns.begin(), t.columns.end());
  for (const auto& row : t.rows) {
    std::vector<Cell> r{static_cast<std::int64_t>(prov.seed), prov.config_hash(), prov.version};
    r.insert(r.end(), row.begin(), row.end());
    wide.add_row(std::move(r));
  }
  std::ifstream probe(path);
  const bool fresh = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
  probe.close();
  std::string csv = to_csv(wide);
  if (!fresh) csv = csv.substr(csv.find('\n') + 1);
  std::ofstream out(path, std::ios::app);
  require(bool(out), "cannot open result store " + path);
  out << csv;
}

}  // namespace rstein
