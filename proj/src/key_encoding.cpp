#include "pdex/key_encoding.hpp"

#include <bit>
#include <cstdint>

#include "pdex/error.hpp"

namespace pdex {

namespace {

void put_be64(EncodedKey& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_be64(std::string_view in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(in[pos + i]);
  return v;
}

constexpr std::uint64_t kSignBit = 0x8000000000000000ULL;

}  // namespace

void append_key_value(EncodedKey& out, const Value& v) {
  switch (v.index()) {
    case 0:
      out.push_back('\0');
      return;
    case 1:
      out.push_back('\x01');
      put_be64(out, static_cast<std::uint64_t>(std::get<1>(v)) ^ kSignBit);
      return;
    case 2: {
      double d = std::get<2>(v);
      if (d == 0.0) d = 0.0;
      auto bits = std::bit_cast<std::uint64_t>(d);
      bits = (bits & kSignBit) ? ~bits : (bits | kSignBit);
      out.push_back('\x01');
      put_be64(out, bits);
      return;
    }
    default:
      out.push_back('\x01');
      for (char c : std::get<3>(v)) {
        out.push_back(c);
        if (c == '\0') out.push_back('\xFF');
      }
      out.push_back('\0');
      out.push_back('\0');
  }
}

EncodedKey encode_key(std::span<const Value> values) {
  EncodedKey out;
  for (const auto& v : values) append_key_value(out, v);
  return out;
}

std::vector<Value> decode_key(std::span<const ColumnType> types, std::string_view bytes,
                              std::size_t* consumed) {
  std::vector<Value> values;
  values.reserve(types.size());
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw Error(ErrorCode::bad_file, "truncated key");
  };
  for (ColumnType type : types) {
    need(1);
    if (bytes[pos++] == '\0') {
      values.emplace_back();
      continue;
    }
    switch (type) {
      case ColumnType::int64:
        need(8);
        values.emplace_back(static_cast<std::int64_t>(get_be64(bytes, pos) ^ kSignBit));
        pos += 8;
        break;
      case ColumnType::float64: {
        need(8);
        auto bits = get_be64(bytes, pos);
        bits = (bits & kSignBit) ? (bits & ~kSignBit) : ~bits;
        values.emplace_back(std::bit_cast<double>(bits));
        pos += 8;
        break;
      }
      case ColumnType::string:
      case ColumnType::blob: {
        std::string s;
        for (;;) {
          need(2);
          char c = bytes[pos];
          if (c == '\0') {
            char next = bytes[pos + 1];
            pos += 2;
            if (next == '\0') break;
            s.push_back('\0');
          } else {
            s.push_back(c);
            ++pos;
          }
        }
        values.emplace_back(std::move(s));
      }
    }
  }
  if (consumed) *consumed = pos;
  return values;
}

std::optional<std::string> prefix_successor(std::string_view prefix) {
  std::string s(prefix);
  while (!s.empty()) {
    auto last = static_cast<unsigned char>(s.back());
    if (last != 0xFF) {
      s.back() = static_cast<char>(last + 1);
      return s;
    }
    s.pop_back();
  }
  return std::nullopt;
}

}  // namespace pdex
