#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace bbm {

using Cell = std::variant<double, std::int64_t, std::string>;

struct Column {
  std::string name;
  /// Unit or scale of the column; "1" for dimensionless numbers, "label" for text.
  std::string unit;
  bool operator==(const Column&) const = default;
};

struct Provenance {
  std::string experiment;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::string code_version;
  bool operator==(const Provenance&) const = default;
};

/// Named columns plus a provenance header and a free-form summary object.
struct ResultTable {
  std::string name;
  Provenance provenance;
  std::vector<Column> columns;
  std::vector<std::vector<Cell>> rows;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();

  /// Appends a row; throws std::invalid_argument on a width mismatch.
  void add_row(std::vector<Cell> row);
  /// Index of a column, throws std::out_of_range if missing.
  std::size_t column_index(const std::string& name) const;
  /// Numeric value of a cell, NaN for strings.
  double number(std::size_t row, const std::string& column) const;
  /// Number of rows whose "flagged" column is nonzero.
  std::size_t flagged_rows() const;
};

/// Equality with NaN cells treated as equal to each other.
bool tables_equal(const ResultTable& a, const ResultTable& b);

/// CSV with "# key: value" provenance lines first, then the header and rows.
/// Doubles use %.17g; NaN is written as "nan".
void write_csv(std::ostream& os, const ResultTable& t);

/// JSON object {name, provenance, columns, rows, summary}; NaN becomes null.
nlohmann::ordered_json table_to_json(const ResultTable& t);
ResultTable table_from_json(const nlohmann::ordered_json& j);

/// FNV-1a 64-bit hash, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

std::string code_version();

}  // namespace bbm
