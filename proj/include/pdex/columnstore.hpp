#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pdex/heap.hpp"
#include "pdex/predicate.hpp"
#include "pdex/sql.hpp"
#include "pdex/value.hpp"

namespace pdex {

enum class SegmentEncoding : std::uint8_t { raw = 0, rle = 1, dictionary = 2 };

std::string_view to_string(SegmentEncoding e);

// Segment payload: encoding u8, value count u32, then
//   raw:        count tagged values
//   rle:        run count u32, then (tagged value, run length u32) per run
//   dictionary: dictionary size u32, tagged values, code width u8 (1/2/4), codes
// A tagged value is 0x00 for NULL or 0x01 + int64/float64 (8 bytes LE) or
// string (u32 length + bytes).
std::string encode_segment(ColumnType type, std::span<const Value> values, SegmentEncoding encoding);
std::vector<Value> decode_segment(ColumnType type, std::string_view payload);

// rle when the average run length is >= 4; dictionary for strings with
// distinct/count <= 0.5; raw otherwise.
SegmentEncoding choose_encoding(ColumnType type, std::span<const Value> values);

struct SegmentInfo {
  SegmentEncoding encoding = SegmentEncoding::raw;
  std::uint32_t first_page = 0;  // extent of consecutive columnstore-meta pages
  std::uint32_t page_count = 0;
  std::uint32_t byte_length = 0;
  Value min;
  Value max;
  std::uint32_t null_count = 0;
};

struct RowGroupInfo {
  std::uint32_t id = 0;
  std::uint32_t row_count = 0;
  std::vector<SegmentInfo> segments;  // one per stored column, locator last
  std::vector<std::uint32_t> deleted;  // sorted ordinals in the delete bitmap

  bool is_deleted(std::uint32_t ordinal) const;
};

struct ColumnstoreState {
  std::vector<RowGroupInfo> rowgroups;
  std::vector<std::uint32_t> delta_pages;
  std::vector<std::uint32_t> delta_spare;
};

struct CsScanStats {
  std::size_t segments_skipped = 0;
  std::size_t segments_read = 0;
};

struct CsScanResult {
  std::vector<std::pair<std::uint64_t, Value>> rows;  // (row ordinal, value)
  CsScanStats stats;
};

// Column-wise store: immutable rowgroups of encoded column segments plus a
// deltastore heap of complete rows. Every stored row carries a hidden locator
// column (the base-table row locator) so DML can find it again.
class Columnstore {
 public:
  static constexpr std::size_t kDefaultThreshold = 4096;

  Columnstore(Pager& pager, Schema schema, std::size_t threshold = kDefaultThreshold, ColumnstoreState state = {});

  // Reads the deltastore and locator segments to rebuild the locator map.
  void load();

  // cs_append for one row; returns the number of rowgroups a triggered tuple move created.
  std::size_t append(const Row& row, std::string_view locator = {});
  std::size_t append(std::span<const Row> rows);

  // Drains whole multiples of the threshold from the deltastore into rowgroups.
  std::size_t tuple_move();

  // Removes the row stored under this locator; false when absent.
  bool erase(std::string_view locator);

  CsScanResult scan(const std::string& column, const Conjunction& predicate, bool eliminate = true);
  Value aggregate(const std::string& column, AggregateFn fn, const Conjunction& predicate, bool eliminate = true,
                  CsScanStats* stats = nullptr);

  // Live rows with their locators, rowgroups first, then the deltastore.
  void for_each_row(const std::function<void(const Row&, std::string_view locator)>& visit);

  const Schema& schema() const { return schema_; }
  std::size_t threshold() const { return threshold_; }
  const std::vector<RowGroupInfo>& rowgroups() const { return rowgroups_; }
  std::size_t delta_rows() const { return delta_count_; }
  std::size_t delta_pages() const { return delta_.pages().size(); }
  std::size_t live_rows() const;
  ColumnstoreState state() const;

 private:
  struct Position {
    std::int64_t rowgroup = -1;  // -1: deltastore
    std::uint32_t ordinal = 0;
    Rid rid;
  };

  // Rows of one rowgroup restricted to the requested stored-column ordinals.
  std::vector<std::vector<Value>> read_columns(const RowGroupInfo& rg, std::span<const std::size_t> columns);
  bool eliminated(const RowGroupInfo& rg, const Conjunction& predicate) const;
  template <typename Visit>
  void visit_matches(const std::vector<std::size_t>& needed, const Conjunction& predicate, bool eliminate,
                     CsScanStats& stats, Visit&& visit);
  void write_extent(std::string_view payload, SegmentInfo& info);

  Pager& pager_;
  Schema schema_;   // table columns
  Schema stored_;   // table columns + locator
  std::size_t threshold_;
  std::vector<RowGroupInfo> rowgroups_;
  HeapFile delta_;
  std::size_t delta_count_ = 0;
  std::unordered_map<std::string, Position> positions_;
};

}  // namespace pdex
