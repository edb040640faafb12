#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pdex/pager.hpp"

namespace pdex {

struct Rid {
  PageId page;
  std::uint16_t slot = 0;

  auto operator<=>(const Rid&) const = default;
};

// 6-byte locator form: page_number u32 + slot u16, little-endian.
std::string encode_rid(Rid rid);
Rid decode_rid(std::string_view bytes);

// Unordered row store over a list of heap pages. Records are opaque bytes.
//
// Each record starts with a flag byte:
//   0 row        flag + row bytes
//   1 stub       flag + target page u32 + target slot u16   (forwarding stub)
//   2 relocated  flag + home page u32 + home slot u16 + row bytes
//   3 short row  flag + length u8 + row bytes + padding
// Records are padded to at least 7 bytes so a stub always fits in place;
// rows shorter than that use the short form so the padding is not read back.
// A Rid always names the home slot; chains are at most one hop.
class HeapFile {
 public:
  // Largest row accepted: a relocated record must still fit on an empty page.
  static constexpr std::size_t kMaxRowSize = kMaxRecordSize - 7;

  HeapFile(Pager& pager, std::vector<std::uint32_t> pages = {}, std::vector<std::uint32_t> spare = {});

  // Reads every page once to rebuild the free-space map and forwarding count.
  void load();

  Rid insert(std::string_view row);
  void update(Rid rid, std::string_view row);
  void erase(Rid rid);
  std::string fetch(Rid rid);
  bool contains(Rid rid);

  // Visits every live row once, in page order, reporting its home Rid.
  // Reads exactly pages().size() pages.
  void scan(const std::function<void(Rid, std::string_view)>& visit);

  // Empties the heap; its pages are kept on a spare list and reused before
  // new pages are allocated.
  void reset();

  const std::vector<std::uint32_t>& pages() const { return pages_; }
  const std::vector<std::uint32_t>& spare_pages() const { return spare_; }
  std::uint64_t forwarded_rows() const { return forwarded_; }

 private:
  std::size_t find_page_with_room(std::size_t record_size, std::uint32_t exclude);
  std::uint32_t add_page();
  void note_free(const Page& page);

  Pager& pager_;
  std::vector<std::uint32_t> pages_;
  std::vector<std::uint32_t> spare_;
  std::vector<std::uint16_t> free_;  // parallel to pages_
  std::unordered_map<std::uint32_t, std::size_t> position_;
  std::uint64_t forwarded_ = 0;
};

}  // namespace pdex
