#include "pdex/page.hpp"

#include <array>
#include <cstring>
#include <string>
#include <vector>

#include "pdex/error.hpp"

namespace pdex {

namespace {

// Castagnoli CRC (reflected polynomial 0x82F63B78), raw register form.
std::uint32_t crc32c_table(std::uint32_t crc, const unsigned char* p, std::size_t n) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? (c >> 1) ^ 0x82F63B78u : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
  return crc;
}

#if defined(__x86_64__)
__attribute__((target("sse4.2"))) std::uint32_t crc32c_sse42(std::uint32_t crc, const unsigned char* p,
                                                             std::size_t n) {
  std::uint64_t c = crc;
  for (; n >= 8; p += 8, n -= 8) {
    std::uint64_t w;
    std::memcpy(&w, p, 8);
    c = __builtin_ia32_crc32di(c, w);
  }
  auto c32 = static_cast<std::uint32_t>(c);
  for (; n > 0; ++p, --n) c32 = __builtin_ia32_crc32qi(c32, *p);
  return c32;
}
#endif

std::uint32_t crc32c(std::uint32_t crc, const unsigned char* p, std::size_t n) {
#if defined(__x86_64__)
  static const bool hw = __builtin_cpu_supports("sse4.2");
  if (hw) return crc32c_sse42(crc, p, n);
#endif
  return crc32c_table(crc, p, n);
}

}  // namespace


std::string_view to_string(PageKind kind) {
  switch (kind) {
    case PageKind::catalog: return "catalog";
    case PageKind::heap: return "heap";
    case PageKind::btree_internal: return "btree-internal";
    case PageKind::btree_leaf: return "btree-leaf";
    case PageKind::columnstore_meta: return "columnstore-meta";
  }
  return "unknown";
}

namespace {
constexpr std::uint32_t kNoPage = 0xFFFFFFFFu;
}

Page::Page() = default;

Page::Page(PageId id, PageKind kind, std::uint8_t level) {
  put_u32(header::page_number, id.page_number);
  put_u16(header::file_id, id.file_id);
  buf_[header::kind] = static_cast<std::byte>(kind);
  buf_[header::level] = static_cast<std::byte>(level);
  set_slot_count(0);
  set_free_offset(static_cast<std::uint16_t>(kPageHeaderSize));
  set_right_sibling(std::nullopt);
}

std::uint16_t Page::u16(std::size_t off) const {
  return static_cast<std::uint16_t>(std::to_integer<unsigned>(buf_[off]) |
                                    (std::to_integer<unsigned>(buf_[off + 1]) << 8));
}

std::uint32_t Page::u32(std::size_t off) const {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint32_t>(buf_[off + i]);
  return v;
}

void Page::put_u16(std::size_t off, std::uint16_t v) {
  buf_[off] = static_cast<std::byte>(v & 0xFF);
  buf_[off + 1] = static_cast<std::byte>(v >> 8);
}

void Page::put_u32(std::size_t off, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_[off + i] = static_cast<std::byte>((v >> (8 * i)) & 0xFF);
}

PageId Page::id() const { return PageId{u16(header::file_id), u32(header::page_number)}; }
PageKind Page::kind() const { return static_cast<PageKind>(buf_[header::kind]); }
std::uint8_t Page::level() const { return std::to_integer<std::uint8_t>(buf_[header::level]); }
std::uint16_t Page::slot_count() const { return u16(header::slot_count); }
std::uint16_t Page::free_space_offset() const { return u16(header::free_offset); }

std::optional<PageId> Page::right_sibling() const {
  std::uint32_t n = u32(header::right_sibling);
  if (n == kNoPage) return std::nullopt;
  return PageId{u16(header::right_sibling + 4), n};
}

void Page::set_level(std::uint8_t level) { buf_[header::level] = static_cast<std::byte>(level); }

void Page::set_right_sibling(std::optional<PageId> sibling) {
  put_u32(header::right_sibling, sibling ? sibling->page_number : kNoPage);
  put_u16(header::right_sibling + 4, sibling ? sibling->file_id : 0);
}

std::size_t Page::free_space() const {
  std::size_t dir_start = kPageSize - kSlotSize * slot_count();
  std::size_t off = free_space_offset();
  return dir_start > off ? dir_start - off : 0;
}

std::size_t Page::used_bytes() const {
  std::size_t used = kSlotSize * slot_count();
  for (std::uint16_t s = 0; s < slot_count(); ++s) {
    if (slot_offset(s) != 0) used += slot_length(s);
  }
  return used;
}

void Page::set_slot(std::uint16_t slot, std::uint16_t offset, std::uint16_t length) {
  put_u16(slot_pos(slot), offset);
  put_u16(slot_pos(slot) + 2, length);
}

std::uint16_t Page::append_bytes(std::string_view record) {
  auto off = free_space_offset();
  std::memcpy(buf_.data() + off, record.data(), record.size());
  set_free_offset(static_cast<std::uint16_t>(off + record.size()));
  return off;
}

std::uint16_t Page::slot_insert(std::string_view record) {
  if (record.size() > kMaxRecordSize) {
    throw Error(ErrorCode::record_too_large, std::to_string(record.size()) + " bytes exceeds " +
                                                 std::to_string(kMaxRecordSize));
  }
  if (record.size() + kSlotSize > free_space()) {
    throw Error(ErrorCode::page_full, "page " + std::to_string(id().page_number) + " has " +
                                          std::to_string(free_space()) + " free bytes");
  }
  auto slot = slot_count();
  auto off = append_bytes(record);
  set_slot_count(static_cast<std::uint16_t>(slot + 1));
  set_slot(slot, off, static_cast<std::uint16_t>(record.size()));
  return slot;
}

void Page::slot_insert_at(std::uint16_t pos, std::string_view record) {
  if (record.size() > kMaxRecordSize) throw Error(ErrorCode::record_too_large, "record does not fit a page");
  if (used_bytes() + record.size() + kSlotSize > kPageBodySize) {
    throw Error(ErrorCode::page_full, "ordered insert does not fit");
  }
  if (record.size() + kSlotSize > free_space()) compact();
  auto n = slot_count();
  auto off = append_bytes(record);
  // Directory grows downward: slot i sits below slot i-1, so shifting slots
  // [pos, n) up by one ordinal moves their entries 4 bytes toward the header.
  std::byte* base = buf_.data() + slot_pos(static_cast<std::uint16_t>(n));
  std::memmove(base, base + kSlotSize, kSlotSize * (n - pos));
  set_slot_count(static_cast<std::uint16_t>(n + 1));
  set_slot(pos, off, static_cast<std::uint16_t>(record.size()));
}

void Page::slot_remove_at(std::uint16_t pos) {
  auto n = slot_count();
  std::byte* base = buf_.data() + slot_pos(static_cast<std::uint16_t>(n - 1));
  std::memmove(base + kSlotSize, base, kSlotSize * (n - 1 - pos));
  set_slot(static_cast<std::uint16_t>(n - 1), 0, 0);
  set_slot_count(static_cast<std::uint16_t>(n - 1));
}

void Page::slot_delete(std::uint16_t slot) { set_slot(slot, 0, 0); }

bool Page::slot_update(std::uint16_t slot, std::string_view record) {
  if (slot >= slot_count()) return false;
  auto off = slot_offset(slot);
  auto len = slot_length(slot);
  if (off != 0 && record.size() <= len) {
    std::memcpy(buf_.data() + off, record.data(), record.size());
    set_slot(slot, off, static_cast<std::uint16_t>(record.size()));
    return true;
  }
  if (record.size() > free_space()) return false;
  auto new_off = append_bytes(record);
  set_slot(slot, new_off, static_cast<std::uint16_t>(record.size()));
  return true;
}

bool Page::is_live(std::uint16_t slot) const { return slot < slot_count() && slot_offset(slot) != 0; }

std::string_view Page::record(std::uint16_t slot) const {
  if (!is_live(slot)) return {};
  return std::string_view(reinterpret_cast<const char*>(buf_.data()) + slot_offset(slot), slot_length(slot));
}

void Page::clear_records() {
  std::memset(buf_.data() + kPageHeaderSize, 0, kPageBodySize);
  set_slot_count(0);
  set_free_offset(static_cast<std::uint16_t>(kPageHeaderSize));
}

void Page::compact() {
  const auto n = slot_count();
  std::vector<std::string> records(n);
  std::vector<bool> live(n);
  for (std::uint16_t s = 0; s < n; ++s) {
    live[s] = is_live(s);
    if (live[s]) records[s] = std::string(record(s));
  }
  std::memset(buf_.data() + kPageHeaderSize, 0, kPageBodySize);
  set_slot_count(n);
  set_free_offset(static_cast<std::uint16_t>(kPageHeaderSize));
  for (std::uint16_t s = 0; s < n; ++s) {
    if (!live[s]) {
      set_slot(s, 0, 0);
      continue;
    }
    auto off = append_bytes(records[s]);
    set_slot(s, off, static_cast<std::uint16_t>(records[s].size()));
  }
}

std::uint32_t Page::compute_checksum() const {
  // CRC-32C over the page with the checksum field treated as zero.
  static constexpr unsigned char kZero[4] = {0, 0, 0, 0};
  const auto* p = reinterpret_cast<const unsigned char*>(buf_.data());
  std::uint32_t crc = ~0u;
  crc = crc32c(crc, p, header::checksum);
  crc = crc32c(crc, kZero, 4);
  crc = crc32c(crc, p + header::checksum + 4, kPageSize - header::checksum - 4);
  return ~crc;
}

}  // namespace pdex
