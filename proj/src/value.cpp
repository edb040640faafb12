#include "pdex/value.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>

#include "pdex/error.hpp"

namespace pdex {

std::string_view to_string(ColumnType type) {
  switch (type) {
    case ColumnType::int64: return "int64";
    case ColumnType::float64: return "float64";
    case ColumnType::string: return "string";
    case ColumnType::blob: return "blob";
  }
  return "?";
}

std::optional<ColumnType> parse_column_type(std::string_view text) {
  if (text == "int64") return ColumnType::int64;
  if (text == "float64") return ColumnType::float64;
  if (text == "string") return ColumnType::string;
  if (text == "blob") return ColumnType::blob;
  return std::nullopt;
}

namespace {

int rank(const Value& v) {
  switch (v.index()) {
    case 0: return 0;
    case 1:
    case 2: return 1;
    default: return 2;
  }
}

template <typename T>
int three_way(const T& a, const T& b) {
  return a < b ? -1 : (b < a ? 1 : 0);
}

int compare_int_double(std::int64_t a, double b) {
  // Exact comparison without rounding a to double.
  if (b >= 9.3e18) return -1;
  if (b < -9.3e18) return 1;
  double fl = std::floor(b);
  auto bi = static_cast<std::int64_t>(fl);
  if (a < bi) return -1;
  if (a > bi) return 1;
  return fl == b ? 0 : -1;
}

}  // namespace

int compare_values(const Value& a, const Value& b) {
  int ra = rank(a), rb = rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  if (ra == 0) return 0;
  if (ra == 2) {
    return three_way(std::get<std::string>(a), std::get<std::string>(b));
  }
  if (a.index() == 1 && b.index() == 1) return three_way(std::get<1>(a), std::get<1>(b));
  if (a.index() == 2 && b.index() == 2) return three_way(std::get<2>(a), std::get<2>(b));
  if (a.index() == 1) return compare_int_double(std::get<1>(a), std::get<2>(b));
  return -compare_int_double(std::get<1>(b), std::get<2>(a));
}

std::string render_value(const Value& v) {
  switch (v.index()) {
    case 0: return "NULL";
    case 1: return std::to_string(std::get<1>(v));
    case 2: {
      char buf[64];
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), std::get<2>(v));
      std::string s(buf, end);
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    }
    default: {
      std::string out = "'";
      for (char c : std::get<3>(v)) {
        if (c == '\'') out += '\'';
        out += c;
      }
      out += '\'';
      return out;
    }
  }
}

std::string display_value(const Value& v) {
  if (v.index() == 3) return std::get<3>(v);
  return render_value(v);
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  auto i = find(name);
  if (!i) throw Error(ErrorCode::not_found, "no column '" + std::string(name) + "'");
  return *i;
}

Schema Schema::project(std::span<const std::string> names) const {
  std::vector<Column> cols;
  cols.reserve(names.size());
  for (const auto& n : names) cols.push_back(columns_[index_of(n)]);
  return Schema(std::move(cols));
}

Row conform_row(const Schema& schema, Row row) {
  if (row.size() != schema.size()) {
    throw Error(ErrorCode::schema_mismatch, "expected " + std::to_string(schema.size()) +
                                                " values, got " + std::to_string(row.size()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    const Column& col = schema[i];
    Value& v = row[i];
    if (is_null(v)) {
      if (!col.nullable) throw Error(ErrorCode::schema_mismatch, "column '" + col.name + "' is NOT NULL");
      continue;
    }
    bool ok = false;
    switch (col.type) {
      case ColumnType::int64: ok = v.index() == 1; break;
      case ColumnType::float64:
        if (v.index() == 1) v = static_cast<double>(std::get<1>(v));
        ok = v.index() == 2 && !std::isnan(std::get<2>(v));
        if (ok && std::get<2>(v) == 0.0) v = 0.0;  // fold -0.0
        break;
      case ColumnType::string:
      case ColumnType::blob: ok = v.index() == 3; break;
    }
    if (!ok) {
      throw Error(ErrorCode::schema_mismatch, "value " + render_value(v) + " does not fit column '" +
                                                  col.name + "' of type " + std::string(to_string(col.type)));
    }
  }
  return row;
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view in, std::size_t pos, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= std::uint64_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

[[noreturn]] void truncated() { throw Error(ErrorCode::bad_file, "truncated row record"); }

}  // namespace

std::string encode_row(const Schema& schema, const Row& row) {
  std::string out;
  const std::size_t n = schema.size();
  put_u16(out, static_cast<std::uint16_t>(n));
  std::size_t bitmap_pos = out.size();
  out.append((n + 7) / 8, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    const Value& v = row[i];
    if (is_null(v)) {
      out[bitmap_pos + i / 8] = static_cast<char>(out[bitmap_pos + i / 8] | (1 << (i % 8)));
      continue;
    }
    switch (v.index()) {
      case 1: put_u64(out, static_cast<std::uint64_t>(std::get<1>(v))); break;
      case 2: put_u64(out, std::bit_cast<std::uint64_t>(std::get<2>(v))); break;
      default: {
        const auto& s = std::get<3>(v);
        put_u32(out, static_cast<std::uint32_t>(s.size()));
        out += s;
      }
    }
  }
  return out;
}

Row decode_row(const Schema& schema, std::string_view bytes) {
  if (bytes.size() < 2) truncated();
  const std::size_t n = get_le(bytes, 0, 2);
  if (n != schema.size()) throw Error(ErrorCode::schema_mismatch, "row column count differs from schema");
  std::size_t pos = 2;
  const std::size_t bitmap_pos = pos;
  pos += (n + 7) / 8;
  if (pos > bytes.size()) truncated();
  Row row(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<unsigned char>(bytes[bitmap_pos + i / 8]) & (1 << (i % 8))) continue;
    switch (schema[i].type) {
      case ColumnType::int64:
        if (pos + 8 > bytes.size()) truncated();
        row[i] = static_cast<std::int64_t>(get_le(bytes, pos, 8));
        pos += 8;
        break;
      case ColumnType::float64:
        if (pos + 8 > bytes.size()) truncated();
        row[i] = std::bit_cast<double>(get_le(bytes, pos, 8));
        pos += 8;
        break;
      case ColumnType::string:
      case ColumnType::blob: {
        if (pos + 4 > bytes.size()) truncated();
        auto len = static_cast<std::size_t>(get_le(bytes, pos, 4));
        pos += 4;
        if (pos + len > bytes.size()) truncated();
        row[i] = std::string(bytes.substr(pos, len));
        pos += len;
      }
    }
  }
  return row;
}

}  // namespace pdex
