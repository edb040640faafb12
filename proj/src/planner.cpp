#include "pdex/planner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "pdex/error.hpp"
#include "pdex/key_encoding.hpp"

namespace pdex {

std::string_view to_string(PlanKind kind) {
  switch (kind) {
    case PlanKind::heap_scan: return "heap_scan";
    case PlanKind::clustered_scan: return "clustered_scan";
    case PlanKind::clustered_seek: return "clustered_seek";
    case PlanKind::nc_seek_lookup: return "nc_seek_lookup";
    case PlanKind::nc_covering_seek: return "nc_covering_seek";
    case PlanKind::hash_probe: return "hash_probe";
    case PlanKind::columnstore_scan: return "columnstore_scan";
  }
  return "?";
}

int plan_rank(PlanKind kind) {
  switch (kind) {
    case PlanKind::nc_covering_seek: return 0;
    case PlanKind::clustered_seek: return 1;
    case PlanKind::nc_seek_lookup: return 2;
    case PlanKind::hash_probe: return 3;
    case PlanKind::columnstore_scan: return 4;
    case PlanKind::heap_scan:
    case PlanKind::clustered_scan: return 5;
  }
  return 6;
}

bool plan_less(const AccessPlan& a, const AccessPlan& b) {
  if (a.estimated_reads != b.estimated_reads) return a.estimated_reads < b.estimated_reads;
  if (plan_rank(a.kind) != plan_rank(b.kind)) return plan_rank(a.kind) < plan_rank(b.kind);
  return a.index < b.index;
}

std::optional<KeyRange> key_range(const Schema& schema, const std::vector<std::string>& key_columns,
                                  const Conjunction& where) {
  KeyRange r;
  std::string prefix;
  std::size_t used = 0;
  bool bounded = false;
  for (const auto& col : key_columns) {
    schema.index_of(col);
    ColumnRange cr = column_range(where, col);
    if (!cr.constrained) break;
    ++used;
    for (const auto& a : where) {
      if (a.column == col) r.atoms.push_back(a);
    }
    if (cr.empty) {
      r.empty = true;
      return r;
    }
    if (cr.null_only) {
      prefix.push_back('\x00');
      continue;
    }
    if (cr.lo && cr.hi && cr.lo_inclusive && cr.hi_inclusive && values_equal(*cr.lo, *cr.hi)) {
      append_key_value(prefix, *cr.lo);
      continue;
    }
    if (cr.lo) {
      std::string s = prefix;
      append_key_value(s, *cr.lo);
      r.lo = cr.lo_inclusive ? std::optional<std::string>(s) : prefix_successor(s);
    } else {
      r.lo = prefix + '\x01';  // first non-null encoding
    }
    if (cr.hi) {
      std::string s = prefix;
      append_key_value(s, *cr.hi);
      r.hi = cr.hi_inclusive ? prefix_successor(s) : std::optional<std::string>(s);
    } else if (!prefix.empty()) {
      r.hi = prefix_successor(prefix);
    }
    bounded = true;
    break;
  }
  if (used == 0) return std::nullopt;
  if (!bounded) {
    r.lo = prefix;
    r.hi = prefix_successor(prefix);
  }
  return r;
}

BTreeShape estimate_shape(std::uint64_t entries, double avg_leaf_record, double avg_separator_key, double fill_factor) {
  BTreeShape shape;
  shape.entries = entries;
  const double budget = std::floor(fill_factor * static_cast<double>(kPageBodySize));
  const auto per_leaf = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(budget / (avg_leaf_record + kSlotSize)));
  const auto fanout = std::max<std::uint64_t>(
      2, static_cast<std::uint64_t>(kPageBodySize / (BTree::internal_record_size(0) + avg_separator_key + kSlotSize)));
  shape.leaf_pages = std::max<std::uint64_t>(1, (entries + per_leaf - 1) / per_leaf);
  shape.depth = 1;
  for (std::uint64_t n = shape.leaf_pages; n > 1; n = (n + fanout - 1) / fanout) {
    ++shape.depth;
    shape.internal_pages += (n + fanout - 1) / fanout;
  }
  return shape;
}

std::vector<std::string> query_columns(const Query& query, const Schema& schema) {
  std::vector<std::string> cols;
  auto add = [&](const std::string& c) {
    if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
  };
  if (query.aggregate) {
    if (!query.aggregate->column.empty()) add(query.aggregate->column);
  } else if (query.projected.empty()) {
    for (const auto& c : schema.columns()) add(c.name);
  } else {
    for (const auto& c : query.projected) add(c);
  }
  for (const auto& c : referenced_columns(query.where)) add(c);
  return cols;
}

namespace {

bool subset_of(const std::vector<std::string>& cols, const std::vector<std::string>& a,
               const std::vector<std::string>& b = {}) {
  for (const auto& c : cols) {
    if (std::find(a.begin(), a.end(), c) == a.end() && std::find(b.begin(), b.end(), c) == b.end()) return false;
  }
  return true;
}

Conjunction conj_and(const Conjunction& a, const Conjunction& b) {
  Conjunction out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Conjunction atoms_on(const Conjunction& where, const std::vector<std::string>& a, const std::vector<std::string>& b) {
  Conjunction out;
  for (const auto& atom : where) {
    if (subset_of({atom.column}, a, b)) out.push_back(atom);
  }
  return out;
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return b == 0 ? 0 : (a + b - 1) / b; }

// Root-to-leaf descent plus one read per additional leaf the matches spill into.
std::uint64_t seek_cost(const BTreeShape& shape, std::uint64_t matched) {
  std::uint64_t per_leaf = std::max<std::uint64_t>(1, shape.entries / std::max<std::uint64_t>(1, shape.leaf_pages));
  std::uint64_t leaves = std::max<std::uint64_t>(1, ceil_div(matched, per_leaf));
  return shape.depth + leaves - 1;
}

}  // namespace

std::vector<AccessPlan> enumerate(const Query& query, const Catalog& catalog, const PlanningInput& input) {
  const Schema& schema = *input.schema;
  const std::vector<std::string> cols = query_columns(query, schema);
  std::map<std::string, const IndexFacts*> facts;
  for (const auto& f : input.indexes) facts[f.def->name] = &f;
  auto facts_of = [&](const IndexEntry& e) -> const IndexFacts& {
    auto it = facts.find(e.def.name);
    if (it == facts.end()) throw Error(ErrorCode::missing_stats, "no statistics for index '" + e.def.name + "'");
    return *it->second;
  };

  std::vector<AccessPlan> plans;
  const IndexEntry* clustered = catalog.clustered_index(query.table);
  std::uint64_t clustered_depth = 0;
  if (!clustered) {
    plans.push_back(AccessPlan{PlanKind::heap_scan, "", input.table.heap_pages, false, {}, {}});
  } else {
    const BTreeShape& shape = facts_of(*clustered).shape;
    clustered_depth = shape.depth;
    plans.push_back(
        AccessPlan{PlanKind::clustered_scan, clustered->def.name, shape.leaf_pages + shape.depth - 1, true, {}, {}});
    if (auto range = key_range(schema, clustered->def.key_columns, query.where)) {
      std::uint64_t cost = range->empty ? 0 : seek_cost(shape, input.count(range->atoms));
      plans.push_back(AccessPlan{PlanKind::clustered_seek, clustered->def.name, cost, true, std::move(*range), {}});
    }
  }

  auto lookup_cost = [&](std::uint64_t rows) -> std::uint64_t {
    if (clustered) return rows * clustered_depth;
    const auto& t = input.table;
    if (t.rows == 0) return rows;
    return ceil_div(rows * (t.rows + t.forwarded_rows), t.rows);
  };

  for (const IndexEntry* entry : catalog.indexes_of(query.table)) {
    const IndexDef& def = entry->def;
    if (def.kind == IndexKind::clustered) continue;
    if (!def.filter.empty() && !implies(query.where, def.filter)) continue;
    const IndexFacts& f = facts_of(*entry);
    switch (def.kind) {
      case IndexKind::nonclustered: {
        auto range = key_range(schema, def.key_columns, query.where);
        if (!range) break;
        const bool covering = subset_of(cols, def.key_columns, def.included_columns);
        AccessPlan plan{covering ? PlanKind::nc_covering_seek : PlanKind::nc_seek_lookup, def.name, 0, covering, {}, {}};
        if (!range->empty) {
          plan.estimated_reads = seek_cost(f.shape, input.count(conj_and(def.filter, range->atoms)));
          if (!covering) {
            Conjunction local = atoms_on(query.where, def.key_columns, def.included_columns);
            plan.estimated_reads += lookup_cost(input.count(conj_and(def.filter, local)));
          }
        }
        plan.range = std::move(*range);
        plans.push_back(std::move(plan));
        break;
      }
      case IndexKind::hash: {
        std::vector<Value> values;
        for (const auto& col : def.key_columns) {
          ColumnRange cr = column_range(query.where, col);
          if (cr.empty || cr.null_only || !cr.lo || !cr.hi || !cr.lo_inclusive || !cr.hi_inclusive ||
              !values_equal(*cr.lo, *cr.hi)) {
            break;
          }
          values.push_back(*cr.lo);
        }
        if (values.size() != def.key_columns.size()) break;
        const bool covering = subset_of(cols, def.key_columns);
        std::uint64_t chain = static_cast<std::uint64_t>(std::ceil(f.chain.avg_chain));
        AccessPlan plan{PlanKind::hash_probe, def.name, 1 + chain, covering, {}, encode_key(values)};
        if (!covering) plan.estimated_reads += lookup_cost(input.count(atoms_on(query.where, def.key_columns, {})));
        plans.push_back(std::move(plan));
        break;
      }
      case IndexKind::columnstore: {
        if (!query.aggregate || !f.rowgroups) break;
        std::vector<std::size_t> needed;
        if (!query.aggregate->column.empty()) needed.push_back(schema.index_of(query.aggregate->column));
        const auto referenced = referenced_columns(query.where);
        for (const auto& c : referenced) {
          auto idx = schema.index_of(c);
          if (std::find(needed.begin(), needed.end(), idx) == needed.end()) needed.push_back(idx);
        }
        std::uint64_t cost = f.delta_pages;
        for (const auto& rg : *f.rowgroups) {
          bool skip = false;
          for (const auto& c : referenced) {
            const SegmentInfo& seg = rg.segments[schema.index_of(c)];
            ColumnRange cr = column_range(query.where, c);
            if (!cr.may_overlap(seg.min, seg.max, seg.null_count > 0, seg.null_count < rg.row_count)) {
              skip = true;
              break;
            }
          }
          if (skip) continue;
          for (std::size_t idx : needed) cost += rg.segments[idx].page_count;
        }
        plans.push_back(AccessPlan{PlanKind::columnstore_scan, def.name, cost, true, {}, {}});
        break;
      }
      case IndexKind::clustered: break;
    }
  }
  std::stable_sort(plans.begin(), plans.end(), plan_less);
  return plans;
}

std::string render_explain(const std::vector<AccessPlan>& candidates, std::size_t chosen,
                           std::optional<std::uint64_t> actual_reads) {
  std::ostringstream out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const AccessPlan& p = candidates[i];
    out << to_string(p.kind) << " index=" << (p.index.empty() ? "-" : p.index) << " est_reads=" << p.estimated_reads
        << " covering=" << (p.covering ? 'y' : 'n') << " chosen=" << (i == chosen ? 'y' : 'n') << '\n';
  }
  if (actual_reads) out << "actual_reads=" << *actual_reads << '\n';
  return out.str();
}

}  // namespace pdex
