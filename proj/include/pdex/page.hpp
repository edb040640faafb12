#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace pdex {

inline constexpr std::size_t kPageSize = 8192;
inline constexpr std::size_t kPageHeaderSize = 32;
inline constexpr std::size_t kSlotSize = 4;
inline constexpr std::size_t kPageBodySize = kPageSize - kPageHeaderSize;          // 8160
inline constexpr std::size_t kMaxRecordSize = kPageBodySize - kSlotSize;            // 8156
inline constexpr std::uint16_t kDataFileId = 1;

enum class PageKind : std::uint8_t {
  catalog = 0,
  heap = 1,
  btree_internal = 2,
  btree_leaf = 3,
  columnstore_meta = 4,
};

std::string_view to_string(PageKind kind);

struct PageId {
  std::uint16_t file_id = kDataFileId;
  std::uint32_t page_number = 0;

  auto operator<=>(const PageId&) const = default;
};

inline PageId page_id(std::uint32_t page_number) { return PageId{kDataFileId, page_number}; }

// Header layout (little-endian):
//   0  page_number u32      4  file_id u16       6  kind u8         7  level u8
//   8  slot_count u16      10  free_space_offset u16
//  12  right_sibling page_number u32 + file_id u16 (page_number 0xFFFFFFFF = none)
//  18  checksum u32 (CRC-32C, field zeroed)   22  reserved (10 bytes; catalog pages keep a chunk length here)
// Slot i lives at bytes [8192 - 4(i+1), 8192 - 4i): offset u16, length u16.
// Offset 0 marks a tombstoned slot.
namespace header {
inline constexpr std::size_t page_number = 0;
inline constexpr std::size_t file_id = 4;
inline constexpr std::size_t kind = 6;
inline constexpr std::size_t level = 7;
inline constexpr std::size_t slot_count = 8;
inline constexpr std::size_t free_offset = 10;
inline constexpr std::size_t right_sibling = 12;
inline constexpr std::size_t checksum = 18;
inline constexpr std::size_t reserved = 22;
}  // namespace header

class Page {
 public:
  Page();
  Page(PageId id, PageKind kind, std::uint8_t level = 0);

  PageId id() const;
  PageKind kind() const;
  std::uint8_t level() const;
  std::uint16_t slot_count() const;
  std::uint16_t free_space_offset() const;
  std::optional<PageId> right_sibling() const;

  void set_level(std::uint8_t level);
  void set_right_sibling(std::optional<PageId> sibling);

  // Contiguous bytes available for one more record plus its slot entry.
  std::size_t free_space() const;
  // Bytes occupied by live records and all slot entries (excludes dead record bytes).
  std::size_t used_bytes() const;

  // Appends a record at the next slot ordinal. Throws record_too_large / page_full.
  std::uint16_t slot_insert(std::string_view record);
  // Inserts a record so that it becomes slot `pos`, shifting later slots up by one.
  // Compacts the page first when only fragmented space remains.
  void slot_insert_at(std::uint16_t pos, std::string_view record);
  // Removes slot `pos` entirely, shifting later slots down (used by ordered pages).
  void slot_remove_at(std::uint16_t pos);
  // Tombstones a slot; ordinals of other slots are unchanged.
  void slot_delete(std::uint16_t slot);
  // Replaces a record in place, or relocates it inside this page. False if it does not fit.
  bool slot_update(std::uint16_t slot, std::string_view record);

  bool is_live(std::uint16_t slot) const;
  std::string_view record(std::uint16_t slot) const;  // empty view for a tombstone

  // Drops all records and slots, keeping id/kind/level/sibling.
  void clear_records();
  // Rewrites live records contiguously; slot ordinals are preserved.
  void compact();

  std::span<std::byte, kPageSize> bytes() { return std::span<std::byte, kPageSize>(buf_); }
  std::span<const std::byte, kPageSize> bytes() const { return std::span<const std::byte, kPageSize>(buf_); }

  std::uint16_t u16(std::size_t off) const;
  std::uint32_t u32(std::size_t off) const;
  void put_u16(std::size_t off, std::uint16_t v);
  void put_u32(std::size_t off, std::uint32_t v);

  std::uint32_t compute_checksum() const;
  std::uint32_t stored_checksum() const { return u32(header::checksum); }
  void seal() { put_u32(header::checksum, compute_checksum()); }

 private:
  std::size_t slot_pos(std::uint16_t slot) const { return kPageSize - kSlotSize * (slot + 1); }
  std::uint16_t slot_offset(std::uint16_t slot) const { return u16(slot_pos(slot)); }
  std::uint16_t slot_length(std::uint16_t slot) const { return u16(slot_pos(slot) + 2); }
  void set_slot(std::uint16_t slot, std::uint16_t offset, std::uint16_t length);
  void set_slot_count(std::uint16_t n) { put_u16(header::slot_count, n); }
  void set_free_offset(std::uint16_t off) { put_u16(header::free_offset, off); }
  std::uint16_t append_bytes(std::string_view record);

  std::array<std::byte, kPageSize> buf_{};
};

}  // namespace pdex
