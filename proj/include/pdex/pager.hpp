#pragma once

#include <cstdint>
#include <filesystem>

#include "pdex/page.hpp"

namespace pdex {

struct IoCounters {
  std::uint64_t logical_reads = 0;
  std::uint64_t logical_writes = 0;
};

inline constexpr char kMagic[8] = {'P', 'D', 'E', 'X', 'v', '1', '\0', '\0'};

// Owns the single data file of a database. Every read_page/write_page goes to
// the file and is counted; there is no cache.
class Pager {
 public:
  // Creates a new file holding only page 0 (catalog root with magic bytes).
  static Pager create(const std::filesystem::path& path);
  static Pager open(const std::filesystem::path& path);

  Pager(Pager&& other) noexcept;
  Pager& operator=(Pager&& other) noexcept;
  Pager(const Pager&) = delete;
  Pager& operator=(const Pager&) = delete;
  ~Pager();

  PageId allocate_page(PageKind kind, std::uint8_t level = 0);
  Page read_page(PageId id);
  void write_page(Page& page);

  // Accesses to memory-resident structures (hash buckets, chains) are charged
  // as logical reads so every access path is costed in one unit.
  void charge_reads(std::uint64_t n) { counters_.logical_reads += n; }

  std::uint32_t page_count() const { return page_count_; }
  const IoCounters& counters() const { return counters_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  Pager(int fd, std::filesystem::path path, std::uint32_t page_count);
  void check_range(PageId id) const;

  int fd_ = -1;
  std::filesystem::path path_;
  std::uint32_t page_count_ = 0;
  IoCounters counters_;
};

}  // namespace pdex
