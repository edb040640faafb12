#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "pdex/value.hpp"

namespace pdex {

struct CsvField {
  std::string text;
  bool quoted = false;
};

struct CsvRecord {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<CsvField> fields;
};

// RFC-4180: comma separated, CRLF or LF line ends, double quotes around fields
// that contain separators, "" inside quotes for a literal quote.
std::vector<CsvRecord> parse_csv(std::string_view text);

// Unquoted empty field is NULL; anything else is parsed by column type.
// Throws parse_error naming the line.
Value parse_csv_value(const Column& column, const CsvField& field, std::size_t line);

}  // namespace pdex
