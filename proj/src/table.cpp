#include "bbm/table.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#ifndef BBMLAB_VERSION
#define BBMLAB_VERSION "0.0.0"
#endif

namespace bbm {

void ResultTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw std::invalid_argument("row width " + std::to_string(row.size()) + " does not match " +
                                std::to_string(columns.size()) + " columns in " + name);
  }
  rows.push_back(std::move(row));
}

std::size_t ResultTable::column_index(const std::string& col) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == col) return i;
  }
  throw std::out_of_range("no column " + col + " in " + name);
}

double ResultTable::number(std::size_t row, const std::string& col) const {
  const Cell& c = rows.at(row).at(column_index(col));
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  return std::numeric_limits<double>::quiet_NaN();
}

std::size_t ResultTable::flagged_rows() const {
  std::size_t idx = columns.size();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == "flagged") idx = i;
  }
  if (idx == columns.size()) return 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double v = number(r, "flagged");
    if (v != 0.0 && !std::isnan(v)) ++n;
  }
  return n;
}

namespace {

bool cells_equal(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    return (std::isnan(*x) && std::isnan(y)) || *x == y;
  }
  return a == b;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

bool tables_equal(const ResultTable& a, const ResultTable& b) {
  if (a.name != b.name || !(a.provenance == b.provenance) || a.columns != b.columns ||
      a.rows.size() != b.rows.size() || a.summary != b.summary) {
    return false;
  }
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    for (std::size_t c = 0; c < a.columns.size(); ++c) {
      if (!cells_equal(a.rows[r][c], b.rows[r][c])) return false;
    }
  }
  return true;
}

void write_csv(std::ostream& os, const ResultTable& t) {
  os << "# table: " << t.name << '\n';
  os << "# experiment: " << t.provenance.experiment << '\n';
  os << "# config_hash: " << t.provenance.config_hash << '\n';
  os << "# master_seed: " << t.provenance.master_seed << '\n';
  os << "# code_version: " << t.provenance.code_version << '\n';
  os << "# units:";
  for (const auto& c : t.columns) os << ' ' << c.name << '=' << c.unit;
  os << '\n';
  if (!t.summary.empty()) os << "# summary: " << t.summary.dump() << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    os << (i ? "," : "") << csv_escape(t.columns[i].name);
  }
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      std::visit(
          [&os](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, double>) {
              os << format_double(v);
            } else if constexpr (std::is_same_v<V, std::int64_t>) {
              os << v;
            } else {
              os << csv_escape(v);
            }
          },
          row[i]);
    }
    os << '\n';
  }
}

nlohmann::ordered_json table_to_json(const ResultTable& t) {
  nlohmann::ordered_json j;
  j["name"] = t.name;
  j["provenance"] = {{"experiment", t.provenance.experiment},
                     {"config_hash", t.provenance.config_hash},
                     {"master_seed", t.provenance.master_seed},
                     {"code_version", t.provenance.code_version}};
  auto cols = nlohmann::ordered_json::array();
  for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}});
  j["columns"] = cols;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    auto jr = nlohmann::ordered_json::array();
    for (const auto& cell : row) {
      std::visit(
          [&jr](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, double>) {
              if (std::isfinite(v)) {
                jr.push_back(v);
              } else {
                jr.push_back(nullptr);
              }
            } else {
              jr.push_back(v);
            }
          },
          cell);
    }
    rows.push_back(jr);
  }
  j["rows"] = rows;
  j["summary"] = t.summary;
  return j;
}

ResultTable table_from_json(const nlohmann::ordered_json& j) {
  ResultTable t;
  t.name = j.at("name").get<std::string>();
  const auto& p = j.at("provenance");
  t.provenance.experiment = p.at("experiment").get<std::string>();
  t.provenance.config_hash = p.at("config_hash").get<std::string>();
  t.provenance.master_seed = p.at("master_seed").get<std::uint64_t>();
  t.provenance.code_version = p.at("code_version").get<std::string>();
  for (const auto& c : j.at("columns")) {
    t.columns.push_back({c.at("name").get<std::string>(), c.at("unit").get<std::string>()});
  }
  for (const auto& jr : j.at("rows")) {
    std::vector<Cell> row;
    for (const auto& v : jr) {
      if (v.is_null()) {
        row.emplace_back(std::numeric_limits<double>::quiet_NaN());
      } else if (v.is_number_float()) {
        row.emplace_back(v.get<double>());
      } else if (v.is_number_integer()) {
        row.emplace_back(v.get<std::int64_t>());
      } else {
        row.emplace_back(v.get<std::string>());
      }
    }
    t.add_row(std::move(row));
  }
  t.summary = j.at("summary");
  return t;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string code_version() { return BBMLAB_VERSION; }

}  // namespace bbm
