#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdex/value.hpp"

namespace pdex {

enum class CompareOp { eq, lt, gt, between, is_null, is_not_null };

// col = lo | col < lo | col > lo | col BETWEEN lo AND hi | col IS [NOT] NULL
struct Atom {
  std::string column;
  CompareOp op = CompareOp::eq;
  Value lo;
  Value hi;

  bool operator==(const Atom& other) const;
};

// Conjunction of atoms; empty means "match everything".
using Conjunction = std::vector<Atom>;

std::string render_atom(const Atom& atom);
std::string render_conjunction(const Conjunction& conj);

bool eval_atom(const Atom& atom, const Value& v);

// Checks columns and literal types against the schema and normalizes literals
// (int literal on a float64 column becomes a double). Throws not_found or
// type_mismatch.
Conjunction bind_conjunction(const Schema& schema, Conjunction conj);

// Atoms paired with resolved column ordinals, for evaluation against rows.
class BoundPredicate {
 public:
  BoundPredicate() = default;
  BoundPredicate(const Schema& schema, const Conjunction& conj);

  bool matches(const Row& row) const;
  bool empty() const { return atoms_.empty(); }

 private:
  std::vector<std::pair<std::size_t, Atom>> atoms_;
};

// Interval of values a conjunction admits for one column.
struct ColumnRange {
  std::optional<Value> lo;
  bool lo_inclusive = true;
  std::optional<Value> hi;
  bool hi_inclusive = true;
  bool constrained = false;  // at least one atom on the column
  bool null_only = false;    // IS NULL
  bool non_null = false;     // any atom that rejects NULL
  bool empty = false;        // contradictory

  bool contains(const Value& v) const;
  // Could any value in [min, max] (plus `has_nulls`) satisfy this range?
  bool may_overlap(const Value& min, const Value& max, bool has_nulls, bool has_values) const;
};

ColumnRange column_range(const Conjunction& conj, const std::string& column);

// Syntactic implication over conjunctions: true when every row satisfying
// `query` satisfies `filter`. Conservative.
bool implies(const Conjunction& query, const Conjunction& filter);

std::vector<std::string> referenced_columns(const Conjunction& conj);

}  // namespace pdex
