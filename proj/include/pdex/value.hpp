#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pdex {

enum class ColumnType : std::uint8_t { int64 = 0, float64 = 1, string = 2, blob = 3 };

std::string_view to_string(ColumnType type);
std::optional<ColumnType> parse_column_type(std::string_view text);

// NULL is the monostate alternative. Blob values share the string alternative;
// the column type tells them apart.
using Value = std::variant<std::monostate, std::int64_t, double, std::string>;
using Row = std::vector<Value>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

// Total order used everywhere values are compared: NULL first, then numbers
// (int64 and float64 compare numerically), then strings bytewise.
int compare_values(const Value& a, const Value& b);

inline bool values_equal(const Value& a, const Value& b) { return compare_values(a, b) == 0; }

// Literal-style rendering: 42, 1.5, 'it''s', NULL. Blobs render as quoted strings.
std::string render_value(const Value& v);

// Plain rendering for tabular output (strings unquoted).
std::string display_value(const Value& v);

struct Column {
  std::string name;
  ColumnType type = ColumnType::int64;
  bool nullable = true;

  bool operator==(const Column&) const = default;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Column> columns) : columns_(std::move(columns)) {}

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  const Column& operator[](std::size_t i) const { return columns_[i]; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws not_found

  Schema project(std::span<const std::string> names) const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<Column> columns_;
};

// Converts literal types where a lossless conversion exists (int -> float64)
// and checks the row against the schema. Throws schema_mismatch.
Row conform_row(const Schema& schema, Row row);

// Row format: u16 column count, null bitmap, then non-null values in column
// order: int64/float64 as 8 little-endian bytes, string/blob as u32 length + bytes.
std::string encode_row(const Schema& schema, const Row& row);
Row decode_row(const Schema& schema, std::string_view bytes);

}  // namespace pdex
