#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdex/value.hpp"

namespace pdex {

// Order-preserving composite key bytes: memcmp order of two encodings equals
// the tuple order of the values they encode.
//
// Per column: NULL is the single byte 0x00; any other value is 0x01 followed by
//   int64   8 bytes big-endian with the sign bit flipped
//   float64 8 bytes big-endian IEEE-754 total-order transform (-0.0 folded to +0.0)
//   string  bytes with 0x00 escaped as 0x00 0xFF, terminated by 0x00 0x00
// Every column encoding is self-delimiting, so a prefix of columns is a prefix
// of the bytes.
using EncodedKey = std::string;

void append_key_value(EncodedKey& out, const Value& v);

EncodedKey encode_key(std::span<const Value> values);

// Decodes `types.size()` column values from the front of `bytes`; `consumed`
// receives the number of bytes used.
std::vector<Value> decode_key(std::span<const ColumnType> types, std::string_view bytes,
                              std::size_t* consumed = nullptr);

// Smallest byte string greater than every string having `prefix` as a prefix;
// nullopt when no such string exists (empty or all-0xFF prefix).
std::optional<std::string> prefix_successor(std::string_view prefix);

}  // namespace pdex
