#include "pdex/stats.hpp"

#include <unordered_set>

#include "pdex/error.hpp"
#include "pdex/key_encoding.hpp"

namespace pdex {

std::string to_string(const Ratio& r) { return std::to_string(r.num) + "/" + std::to_string(r.den); }

std::uint64_t distinct_count(const Schema& schema, std::span<const Row> rows, std::span<const std::string> columns) {
  std::vector<std::size_t> idx;
  for (const auto& c : columns) idx.push_back(schema.index_of(c));
  std::unordered_set<std::string> seen;
  seen.reserve(rows.size());
  EncodedKey key;
  for (const auto& row : rows) {
    key.clear();
    for (std::size_t i : idx) append_key_value(key, row[i]);
    seen.insert(key);
  }
  return seen.size();
}

Ratio density(const Schema& schema, std::span<const Row> rows, std::span<const std::string> columns) {
  if (rows.empty()) throw Error(ErrorCode::empty_table, "density of an empty table is undefined");
  return Ratio{1, distinct_count(schema, rows, columns)};
}

SelectivityReport selectivity(const Schema& schema, std::span<const Row> rows, const Conjunction& predicate) {
  SelectivityReport report;
  report.predicate = bind_conjunction(schema, predicate);
  BoundPredicate bound(schema, report.predicate);
  report.total = rows.size();
  for (const auto& row : rows) {
    if (bound.matches(row)) ++report.matched;
  }
  return report;
}

}  // namespace pdex
