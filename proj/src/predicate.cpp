#include "pdex/predicate.hpp"

#include <algorithm>

#include "pdex/error.hpp"

namespace pdex {

bool Atom::operator==(const Atom& other) const {
  return column == other.column && op == other.op && lo.index() == other.lo.index() &&
         hi.index() == other.hi.index() && values_equal(lo, other.lo) && values_equal(hi, other.hi);
}

std::string render_atom(const Atom& a) {
  switch (a.op) {
    case CompareOp::eq: return a.column + " = " + render_value(a.lo);
    case CompareOp::lt: return a.column + " < " + render_value(a.lo);
    case CompareOp::gt: return a.column + " > " + render_value(a.lo);
    case CompareOp::between: return a.column + " BETWEEN " + render_value(a.lo) + " AND " + render_value(a.hi);
    case CompareOp::is_null: return a.column + " IS NULL";
    case CompareOp::is_not_null: return a.column + " IS NOT NULL";
  }
  return {};
}

std::string render_conjunction(const Conjunction& conj) {
  std::string out;
  for (const auto& a : conj) {
    if (!out.empty()) out += " AND ";
    out += render_atom(a);
  }
  return out;
}

bool eval_atom(const Atom& a, const Value& v) {
  switch (a.op) {
    case CompareOp::is_null: return is_null(v);
    case CompareOp::is_not_null: return !is_null(v);
    default: break;
  }
  if (is_null(v)) return false;
  switch (a.op) {
    case CompareOp::eq: return compare_values(v, a.lo) == 0;
    case CompareOp::lt: return compare_values(v, a.lo) < 0;
    case CompareOp::gt: return compare_values(v, a.lo) > 0;
    case CompareOp::between: return compare_values(v, a.lo) >= 0 && compare_values(v, a.hi) <= 0;
    default: return false;
  }
}

namespace {

Value bind_literal(const Column& col, Value v) {
  if (is_null(v)) throw Error(ErrorCode::type_mismatch, "NULL literal in comparison on '" + col.name + "'");
  switch (col.type) {
    case ColumnType::int64:
      if (v.index() == 1) return v;
      break;
    case ColumnType::float64:
      if (v.index() == 1) return static_cast<double>(std::get<1>(v));
      if (v.index() == 2) return std::get<2>(v) == 0.0 ? Value(0.0) : v;
      break;
    case ColumnType::string:
    case ColumnType::blob:
      if (v.index() == 3) return v;
      break;
  }
  throw Error(ErrorCode::type_mismatch, "literal " + render_value(v) + " does not match column '" + col.name +
                                            "' of type " + std::string(to_string(col.type)));
}

}  // namespace

Conjunction bind_conjunction(const Schema& schema, Conjunction conj) {
  for (auto& a : conj) {
    auto idx = schema.find(a.column);
    if (!idx) throw Error(ErrorCode::not_found, "no column '" + a.column + "'");
    const Column& col = schema[*idx];
    switch (a.op) {
      case CompareOp::is_null:
      case CompareOp::is_not_null:
        a.lo = {};
        a.hi = {};
        break;
      case CompareOp::between:
        a.lo = bind_literal(col, std::move(a.lo));
        a.hi = bind_literal(col, std::move(a.hi));
        if (compare_values(a.lo, a.hi) > 0) {
          throw Error(ErrorCode::type_mismatch, "BETWEEN bounds out of order on '" + a.column + "'");
        }
        break;
      default:
        a.lo = bind_literal(col, std::move(a.lo));
        a.hi = {};
    }
  }
  return conj;
}

BoundPredicate::BoundPredicate(const Schema& schema, const Conjunction& conj) {
  atoms_.reserve(conj.size());
  for (const auto& a : conj) atoms_.emplace_back(schema.index_of(a.column), a);
}

bool BoundPredicate::matches(const Row& row) const {
  for (const auto& [idx, atom] : atoms_) {
    if (!eval_atom(atom, row[idx])) return false;
  }
  return true;
}

bool ColumnRange::contains(const Value& v) const {
  if (empty) return false;
  if (is_null(v)) return !non_null;
  if (null_only) return false;
  if (lo) {
    int c = compare_values(v, *lo);
    if (c < 0 || (c == 0 && !lo_inclusive)) return false;
  }
  if (hi) {
    int c = compare_values(v, *hi);
    if (c > 0 || (c == 0 && !hi_inclusive)) return false;
  }
  return true;
}

bool ColumnRange::may_overlap(const Value& min, const Value& max, bool has_nulls, bool has_values) const {
  if (empty) return false;
  if (null_only) return has_nulls;
  if (!non_null && has_nulls) return true;
  if (!has_values) return false;
  if (lo) {
    int c = compare_values(max, *lo);
    if (c < 0 || (c == 0 && !lo_inclusive)) return false;
  }
  if (hi) {
    int c = compare_values(min, *hi);
    if (c > 0 || (c == 0 && !hi_inclusive)) return false;
  }
  return true;
}

namespace {

void tighten_lo(ColumnRange& r, const Value& v, bool inclusive) {
  if (!r.lo) {
    r.lo = v;
    r.lo_inclusive = inclusive;
    return;
  }
  int c = compare_values(v, *r.lo);
  if (c > 0) {
    r.lo = v;
    r.lo_inclusive = inclusive;
  } else if (c == 0) {
    r.lo_inclusive = r.lo_inclusive && inclusive;
  }
}

void tighten_hi(ColumnRange& r, const Value& v, bool inclusive) {
  if (!r.hi) {
    r.hi = v;
    r.hi_inclusive = inclusive;
    return;
  }
  int c = compare_values(v, *r.hi);
  if (c < 0) {
    r.hi = v;
    r.hi_inclusive = inclusive;
  } else if (c == 0) {
    r.hi_inclusive = r.hi_inclusive && inclusive;
  }
}

}  // namespace

ColumnRange column_range(const Conjunction& conj, const std::string& column) {
  ColumnRange r;
  for (const auto& a : conj) {
    if (a.column != column) continue;
    r.constrained = true;
    switch (a.op) {
      case CompareOp::is_null: r.null_only = true; break;
      case CompareOp::is_not_null: r.non_null = true; break;
      case CompareOp::eq:
        r.non_null = true;
        tighten_lo(r, a.lo, true);
        tighten_hi(r, a.lo, true);
        break;
      case CompareOp::lt:
        r.non_null = true;
        tighten_hi(r, a.lo, false);
        break;
      case CompareOp::gt:
        r.non_null = true;
        tighten_lo(r, a.lo, false);
        break;
      case CompareOp::between:
        r.non_null = true;
        tighten_lo(r, a.lo, true);
        tighten_hi(r, a.hi, true);
        break;
    }
  }
  if (r.null_only && r.non_null) r.empty = true;
  if (r.lo && r.hi) {
    int c = compare_values(*r.lo, *r.hi);
    if (c > 0 || (c == 0 && !(r.lo_inclusive && r.hi_inclusive))) r.empty = true;
  }
  return r;
}

bool implies(const Conjunction& query, const Conjunction& filter) {
  for (const auto& f : filter) {
    ColumnRange q = column_range(query, f.column);
    if (q.empty) continue;  // the query matches nothing at all
    switch (f.op) {
      case CompareOp::is_not_null:
        if (!q.non_null) return false;
        continue;
      case CompareOp::is_null:
        if (!q.null_only) return false;
        continue;
      default: break;
    }
    if (!q.non_null) return false;
    ColumnRange fr = column_range(Conjunction{f}, f.column);
    if (fr.lo) {
      if (!q.lo) return false;
      int c = compare_values(*q.lo, *fr.lo);
      if (c < 0 || (c == 0 && q.lo_inclusive && !fr.lo_inclusive)) return false;
    }
    if (fr.hi) {
      if (!q.hi) return false;
      int c = compare_values(*q.hi, *fr.hi);
      if (c > 0 || (c == 0 && q.hi_inclusive && !fr.hi_inclusive)) return false;
    }
  }
  return true;
}

std::vector<std::string> referenced_columns(const Conjunction& conj) {
  std::vector<std::string> cols;
  for (const auto& a : conj) {
    if (std::find(cols.begin(), cols.end(), a.column) == cols.end()) cols.push_back(a.column);
  }
  return cols;
}

}  // namespace pdex
