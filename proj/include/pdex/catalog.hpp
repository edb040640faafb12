#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdex/columnstore.hpp"
#include "pdex/pager.hpp"
#include "pdex/predicate.hpp"
#include "pdex/value.hpp"

namespace pdex {

enum class IndexKind { clustered, nonclustered, hash, columnstore };

std::string_view to_string(IndexKind kind);
std::optional<IndexKind> parse_index_kind(std::string_view text);

struct IndexDef {
  std::string name;
  std::string table;
  IndexKind kind = IndexKind::nonclustered;
  std::vector<std::string> key_columns;
  std::vector<std::string> included_columns;  // nonclustered only
  bool unique = false;
  Conjunction filter;        // nonclustered or columnstore only
  double fill_factor = 1.0;  // [0.5, 1.0]
  std::size_t buckets = 0;   // hash only; 0 picks a default from the row count

  bool operator==(const IndexDef&) const = default;
};

struct TableDef {
  std::string name;
  Schema schema;
  std::vector<std::string> primary_key;

  bool operator==(const TableDef&) const = default;
};

enum class Organization { heap, clustered };

// Physical state persisted alongside each definition.
struct TableStorage {
  std::vector<std::uint32_t> heap_pages;
  std::vector<std::uint32_t> heap_spare;
};

struct IndexStorage {
  std::uint32_t root = 0;
  std::uint64_t next_uniquifier = 0;
  ColumnstoreState columnstore;
};

struct TableEntry {
  TableDef def;
  TableStorage storage;
};

struct IndexEntry {
  IndexDef def;
  IndexStorage storage;
};

struct Catalog {
  std::uint64_t next_trace_seq = 1;
  std::vector<TableEntry> tables;
  std::vector<IndexEntry> indexes;

  const TableEntry* find_table(std::string_view name) const;
  TableEntry* find_table(std::string_view name);
  const IndexEntry* find_index(std::string_view name) const;
  IndexEntry* find_index(std::string_view name);
  const IndexEntry* clustered_index(std::string_view table) const;
  Organization organization(std::string_view table) const;
  std::vector<const IndexEntry*> indexes_of(std::string_view table) const;
};

// DDL validity rules for a new index against the current catalog. Throws
// duplicate-name, second-clustered-index, blob-key-column or invalid-index-def.
void validate_index_def(const Catalog& catalog, const IndexDef& def);
void validate_table_def(const Catalog& catalog, const TableDef& def);

// Catalog blob is JSON. It is stored in page 0 after the header and continues
// through a right_sibling chain of catalog pages. Page 0 keeps the chunk length
// at byte 22 and the total blob length at byte 26; continuation pages keep the
// chunk length at byte 22.
std::string serialize_catalog(const Catalog& catalog);
Catalog parse_catalog(std::string_view blob);
void write_catalog_blob(Pager& pager, std::string_view blob);
std::string read_catalog_blob(Pager& pager);

}  // namespace pdex
