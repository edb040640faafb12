#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pdex/predicate.hpp"

namespace pdex {

enum class AggregateFn { sum, count };

struct Aggregate {
  AggregateFn fn = AggregateFn::count;
  std::string column;  // empty for COUNT(*)

  bool operator==(const Aggregate&) const = default;
};

// Single-table query. An empty projection with no aggregate means SELECT *.
struct Query {
  std::string table;
  std::vector<std::string> projected;
  Conjunction where;
  std::optional<Aggregate> aggregate;

  bool operator==(const Query&) const = default;
};

struct Assignment {
  std::string column;
  Value value;
};

struct InsertStatement {
  std::string table;
  std::vector<Row> rows;
};

struct UpdateStatement {
  std::string table;
  std::vector<Assignment> assignments;
  Conjunction where;
};

struct DeleteStatement {
  std::string table;
  Conjunction where;
};

using Statement = std::variant<Query, InsertStatement, UpdateStatement, DeleteStatement>;

// SELECT <col[,col...]|*|COUNT(*)|SUM(col)> FROM <table> [WHERE atom [AND atom]...]
Query parse_query(std::string_view text);
// Also INSERT INTO t VALUES (..)[, (..)], UPDATE t SET c = lit[, ...] [WHERE ..],
// DELETE FROM t [WHERE ..].
Statement parse_statement(std::string_view text);
// atom [AND atom]...
Conjunction parse_conjunction(std::string_view text);

std::string render_query(const Query& q);

}  // namespace pdex
