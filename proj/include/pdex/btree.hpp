#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdex/pager.hpp"

namespace pdex {

struct BTreeEntry {
  std::string key;
  std::string value;
};

enum class Violation { none, ordering, balance, separator, sibling, unique, page_kind };

std::string_view to_string(Violation v);

struct ValidationReport {
  Violation violation = Violation::none;
  std::string detail;

  bool ok() const { return violation == Violation::none; }
};

struct BTreeShape {
  std::uint32_t depth = 1;
  std::uint64_t leaf_pages = 1;
  std::uint64_t internal_pages = 0;
  std::uint64_t entries = 0;
};

// Paged B+tree over byte-string keys. Stored keys are unique within a tree;
// callers make duplicate user keys distinct by appending a locator.
//
// Leaf record:     key_len u16 | key | value
// Internal record: key_len u16 | key | child page_number u32
// The first record of an internal node has an empty key (routes everything
// below the next separator). Leaves at level 0 are chained through
// right_sibling. The root page never moves: a root split copies its contents
// into two new children.
class BTree {
 public:
  static constexpr std::size_t kMaxKeySize = 2700;
  // A leaf must hold at least two entries.
  static constexpr std::size_t kMaxLeafRecord = kPageBodySize / 2 - kSlotSize;  // 4076

  using Visitor = std::function<bool(std::string_view key, std::string_view value)>;

  BTree(Pager& pager, PageId root, bool unique);

  static BTree create(Pager& pager, bool unique);
  // Entries must be sorted by key and strictly increasing (duplicate-key otherwise).
  // Leaves are packed to fill_factor of the page body; internal levels are packed full.
  static BTree bulk_build(Pager& pager, bool unique, double fill_factor, std::span<const BTreeEntry> entries);

  static std::size_t leaf_record_size(std::size_t key_size, std::size_t value_size) {
    return 2 + key_size + value_size;
  }
  static std::size_t internal_record_size(std::size_t key_size) { return 2 + key_size + 4; }

  PageId root() const { return root_; }
  bool unique() const { return unique_; }

  void insert(std::string_view key, std::string_view value);
  // Replaces the value stored under an existing key.
  void replace(std::string_view key, std::string_view value);
  void erase(std::string_view key);
  std::optional<std::string> find(std::string_view key);

  // Visits lo <= key < hi in key order; either bound may be absent. The visitor
  // returns false to stop early. Reads depth + (leaves visited - 1) pages.
  void scan(std::optional<std::string_view> lo, std::optional<std::string_view> hi, const Visitor& visit);
  void scan_prefix(std::string_view prefix, const Visitor& visit);

  std::uint32_t depth();
  BTreeShape shape();
  ValidationReport validate();

 private:
  struct PathStep {
    Page page;
    std::uint16_t child;
  };

  void check_entry(std::string_view key, std::string_view value) const;
  void put(std::string_view key, std::string_view value, bool replace);
  void split(Page page, std::vector<std::string> records, std::vector<PathStep>& path);

  Pager& pager_;
  PageId root_;
  bool unique_;
};

}  // namespace pdex
