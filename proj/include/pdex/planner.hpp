#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdex/btree.hpp"
#include "pdex/catalog.hpp"
#include "pdex/hash_index.hpp"
#include "pdex/sql.hpp"

namespace pdex {

enum class PlanKind {
  heap_scan,
  clustered_scan,
  clustered_seek,
  nc_seek_lookup,
  nc_covering_seek,
  hash_probe,
  columnstore_scan,
};

std::string_view to_string(PlanKind kind);

// Tie-break order among equal-cost plans (lower first).
int plan_rank(PlanKind kind);

// Byte range over stored index keys: lo <= key < hi, either side open.
struct KeyRange {
  std::optional<std::string> lo;
  std::optional<std::string> hi;
  Conjunction atoms;  // the query atoms the range enforces
  bool empty = false;  // contradictory predicate; nothing to read
};

// Seek range over an index keyed on `key_columns`: an equality prefix, then
// at most one range column. nullopt when the leading column has no usable atom.
std::optional<KeyRange> key_range(const Schema& schema, const std::vector<std::string>& key_columns,
                                  const Conjunction& where);

struct AccessPlan {
  PlanKind kind = PlanKind::heap_scan;
  std::string index;  // empty for heap_scan
  std::uint64_t estimated_reads = 0;
  bool covering = false;
  KeyRange range;          // seek plans
  std::string probe_key;   // hash_probe
};

// Orders by estimated reads, then plan_rank, then index name.
bool plan_less(const AccessPlan& a, const AccessPlan& b);

struct TableFacts {
  Organization organization = Organization::heap;
  std::uint64_t rows = 0;
  std::uint64_t heap_pages = 0;
  std::uint64_t forwarded_rows = 0;
};

struct IndexFacts {
  const IndexDef* def = nullptr;
  BTreeShape shape;                                  // clustered / nonclustered
  ChainStats chain;                                  // hash
  const std::vector<RowGroupInfo>* rowgroups = nullptr;  // columnstore
  std::uint64_t delta_pages = 0;                     // columnstore
};

struct PlanningInput {
  const Schema* schema = nullptr;
  TableFacts table;
  std::vector<IndexFacts> indexes;
  // Exact number of base rows satisfying a conjunction.
  std::function<std::uint64_t(const Conjunction&)> count;
};

// Capacity formula: leaves hold floor(floor(fill_factor * 8160) / (record + 4))
// entries; internal pages hold floor(8160 / (separator record + 4)) children.
BTreeShape estimate_shape(std::uint64_t entries, double avg_leaf_record, double avg_separator_key, double fill_factor);

// Every column the query touches: projection (all columns for *), predicate
// and aggregate columns.
std::vector<std::string> query_columns(const Query& query, const Schema& schema);

// Candidate plans with estimated reads, sorted by plan_less; the first is the
// chosen one. `query.where` must already be bound. Throws missing-stats when
// an index of the table has no facts.
std::vector<AccessPlan> enumerate(const Query& query, const Catalog& catalog, const PlanningInput& input);

// One line per candidate, then `actual_reads=<n>` when given.
std::string render_explain(const std::vector<AccessPlan>& candidates, std::size_t chosen,
                           std::optional<std::uint64_t> actual_reads = std::nullopt);

struct PlanExplain {
  std::vector<AccessPlan> candidates;
  std::size_t chosen = 0;
  std::optional<std::uint64_t> actual_reads;

  const AccessPlan& plan() const { return candidates.at(chosen); }
  std::string rendered() const { return render_explain(candidates, chosen, actual_reads); }
};

}  // namespace pdex
