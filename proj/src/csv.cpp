#include "pdex/csv.hpp"

#include <charconv>
#include <cmath>

#include "pdex/error.hpp"

namespace pdex {

std::vector<CsvRecord> parse_csv(std::string_view text) {
  std::vector<CsvRecord> records;
  std::size_t i = 0;
  std::size_t line = 1;
  while (i < text.size()) {
    CsvRecord rec;
    rec.line = line;
    for (;;) {
      CsvField field;
      if (i < text.size() && text[i] == '"') {
        field.quoted = true;
        ++i;
        for (;;) {
          if (i >= text.size()) throw Error(ErrorCode::parse_error, "line " + std::to_string(rec.line) + ": unterminated quote");
          char c = text[i++];
          if (c == '"') {
            if (i < text.size() && text[i] == '"') {
              field.text.push_back('"');
              ++i;
              continue;
            }
            break;
          }
          if (c == '\n') ++line;
          field.text.push_back(c);
        }
        if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          throw Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": text after closing quote");
        }
      } else {
        while (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') field.text.push_back(text[i++]);
      }
      rec.fields.push_back(std::move(field));
      if (i < text.size() && text[i] == ',') {
        ++i;
        continue;
      }
      break;
    }
    if (i < text.size() && text[i] == '\r') ++i;
    if (i < text.size() && text[i] == '\n') ++i;
    ++line;
    records.push_back(std::move(rec));
  }
  return records;
}

Value parse_csv_value(const Column& column, const CsvField& field, std::size_t line) {
  if (!field.quoted && field.text.empty()) return Value{};
  auto bad = [&](const char* what) {
    return Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": column '" + column.name + "': " + what +
                                             " '" + field.text + "'");
  };
  const char* first = field.text.data();
  const char* last = first + field.text.size();
  switch (column.type) {
    case ColumnType::int64: {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last) throw bad("not an integer");
      return v;
    }
    case ColumnType::float64: {
      double v = 0;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last || std::isnan(v)) throw bad("not a number");
      return v;
    }
    case ColumnType::string:
    case ColumnType::blob: return field.text;
  }
  return Value{};
}

}  // namespace pdex
