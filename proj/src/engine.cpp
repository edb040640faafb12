#include "pdex/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "pdex/error.hpp"
#include "pdex/heap.hpp"
#include "pdex/key_encoding.hpp"

namespace pdex {

using nlohmann::json;

std::string_view to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::insert: return "INSERT";
    case TraceKind::erase: return "DELETE";
    case TraceKind::update_in_place: return "UPDATE_IN_PLACE";
    case TraceKind::index_maintain: return "INDEX_MAINTAIN";
    case TraceKind::tuple_move: return "TUPLE_MOVE";
    case TraceKind::plan_chosen: return "PLAN_CHOSEN";
  }
  return "?";
}

std::optional<TraceKind> parse_trace_kind(std::string_view text) {
  for (auto k : {TraceKind::insert, TraceKind::erase, TraceKind::update_in_place, TraceKind::index_maintain,
                 TraceKind::tuple_move, TraceKind::plan_chosen}) {
    if (text == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string format_trace_line(const TraceEvent& e) {
  return std::to_string(e.seq) + '\t' + std::string(to_string(e.kind)) + '\t' + e.table + '\t' + e.detail;
}

TraceEvent parse_trace_line(std::string_view line) {
  std::vector<std::string_view> parts;
  for (int i = 0; i < 3; ++i) {
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw Error(ErrorCode::parse_error, "trace line has fewer than 4 fields");
    parts.push_back(line.substr(0, tab));
    line.remove_prefix(tab + 1);
  }
  TraceEvent e;
  try {
    e.seq = std::stoull(std::string(parts[0]));
  } catch (const std::exception&) {
    throw Error(ErrorCode::parse_error, "bad trace sequence number");
  }
  auto kind = parse_trace_kind(parts[1]);
  if (!kind) throw Error(ErrorCode::parse_error, "unknown trace event '" + std::string(parts[1]) + "'");
  e.kind = *kind;
  e.table = std::string(parts[2]);
  e.detail = std::string(line);
  return e;
}

namespace {

std::string to_hex(std::string_view s) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned char c : s) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

std::string from_hex(std::string_view h) {
  std::string out;
  for (std::size_t i = 0; i + 1 < h.size(); i += 2) {
    out.push_back(static_cast<char>(std::stoi(std::string(h.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

json row_json(const Schema& schema, const Row& row) {
  json out = json::array();
  for (std::size_t i = 0; i < row.size(); ++i) {
    const Value& v = row[i];
    switch (v.index()) {
      case 0: out.push_back(nullptr); break;
      case 1: out.push_back(std::get<1>(v)); break;
      case 2: {
        double d = std::get<2>(v);
        if (std::isfinite(d)) out.push_back(d);
        else out.push_back({{"f64", std::bit_cast<std::uint64_t>(d)}});
        break;
      }
      default: {
        const auto& s = std::get<3>(v);
        bool text = schema[i].type == ColumnType::string;
        if (text) {
          try {
            (void)json(s).dump();
          } catch (const json::exception&) {
            text = false;
          }
        }
        if (text) out.push_back(s);
        else out.push_back({{"hex", to_hex(s)}});
      }
    }
  }
  return out;
}

Row json_row(const json& j) {
  Row row;
  for (const auto& v : j) {
    if (v.is_null()) row.emplace_back();
    else if (v.is_number_integer()) row.emplace_back(v.get<std::int64_t>());
    else if (v.is_number()) row.emplace_back(v.get<double>());
    else if (v.is_string()) row.emplace_back(v.get<std::string>());
    else if (v.contains("f64")) row.emplace_back(std::bit_cast<double>(v.at("f64").get<std::uint64_t>()));
    else row.emplace_back(from_hex(v.at("hex").get<std::string>()));
  }
  return row;
}

std::string be64(std::uint64_t v) {
  std::string out(8, '\0');
  for (int i = 7; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<char>(v & 0xFF);
    v >>= 8;
  }
  return out;
}

Row project(const Row& row, const std::vector<std::size_t>& idx) {
  Row out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(row[i]);
  return out;
}

std::vector<std::size_t> ordinals(const Schema& schema, const std::vector<std::string>& cols) {
  std::vector<std::size_t> out;
  for (const auto& c : cols) out.push_back(schema.index_of(c));
  return out;
}

struct Match {
  std::string loc;
  Row row;
};

// NC leaf value: locator length u16 | locator | included row bytes.
std::string nc_value(std::string_view loc, std::string_view included) {
  std::string v(2, '\0');
  v[0] = static_cast<char>(loc.size() & 0xFF);
  v[1] = static_cast<char>(loc.size() >> 8);
  v.append(loc);
  v.append(included);
  return v;
}

std::pair<std::string_view, std::string_view> split_nc_value(std::string_view v) {
  std::size_t n = static_cast<unsigned char>(v[0]) | (static_cast<std::size_t>(static_cast<unsigned char>(v[1])) << 8);
  return {v.substr(2, n), v.substr(2 + n)};
}

Value aggregate_rows(AggregateFn fn, std::optional<std::size_t> column, ColumnType type, const std::vector<Match>& rows) {
  if (fn == AggregateFn::count) {
    std::int64_t n = 0;
    for (const auto& m : rows) {
      if (!column || !is_null(m.row[*column])) ++n;
    }
    return n;
  }
  bool any = false;
  std::int64_t isum = 0;
  std::vector<double> fvalues;
  for (const auto& m : rows) {
    const Value& v = m.row[*column];
    if (is_null(v)) continue;
    any = true;
    if (v.index() == 1) {
      if (__builtin_add_overflow(isum, std::get<1>(v), &isum)) throw Error(ErrorCode::overflow, "SUM overflows int64");
    } else {
      fvalues.push_back(std::get<2>(v));
    }
  }
  if (!any) return Value{};
  if (type == ColumnType::int64) return isum;
  std::sort(fvalues.begin(), fvalues.end());
  double total = 0.0;
  for (double d : fvalues) total += d;
  return total;
}

std::string aggregate_label(const Aggregate& a) {
  std::string fn = a.fn == AggregateFn::sum ? "SUM" : "COUNT";
  return fn + "(" + (a.column.empty() ? "*" : a.column) + ")";
}

}  // namespace

struct Engine::Impl {
  struct TableRt {
    std::unique_ptr<HeapFile> heap;
    std::uint64_t version = 1;
    bool cached = false;
    std::unordered_map<std::string, Row> cache;  // locator -> row
    std::map<std::size_t, std::vector<Value>> sorted;  // column -> cached values in order
  };

  struct IndexRt {
    std::vector<std::size_t> key_idx;
    std::vector<std::size_t> inc_idx;
    std::vector<ColumnType> key_types;
    Schema inc_schema;
    std::optional<BoundPredicate> filter;
    std::unique_ptr<HashIndex> hash;
    std::unique_ptr<Columnstore> cs;
    std::uint64_t shape_version = 0;
    BTreeShape shape;
  };

  std::filesystem::path path;
  EngineOptions options;
  std::unique_ptr<Pager> pager;
  Catalog catalog;
  std::map<std::string, TableRt> tables;
  std::map<std::string, IndexRt> indexes;
  std::vector<TraceEvent> events;
  std::ofstream trace_out;

  // ---- lookup -------------------------------------------------------------

  TableEntry& table(std::string_view name) {
    auto* t = catalog.find_table(name);
    if (!t) throw Error(ErrorCode::not_found, "no table '" + std::string(name) + "'");
    return *t;
  }

  IndexEntry& index(std::string_view name) {
    auto* i = catalog.find_index(name);
    if (!i) throw Error(ErrorCode::not_found, "no index '" + std::string(name) + "'");
    return *i;
  }

  TableRt& trt(const std::string& name) { return tables.at(name); }
  IndexRt& irt(const std::string& name) { return indexes.at(name); }

  BTree tree(const IndexEntry& e) { return BTree(*pager, page_id(e.storage.root), e.def.unique); }

  std::vector<std::string> secondary_names(const std::string& table) {
    std::vector<std::string> out;
    for (const auto& i : catalog.indexes) {
      if (i.def.table == table && i.def.kind != IndexKind::clustered) out.push_back(i.def.name);
    }
    return out;
  }

  IndexRt make_runtime(const TableEntry& t, const IndexDef& def) {
    IndexRt rt;
    const Schema& schema = t.def.schema;
    rt.key_idx = ordinals(schema, def.key_columns);
    rt.inc_idx = ordinals(schema, def.included_columns);
    for (auto i : rt.key_idx) rt.key_types.push_back(schema[i].type);
    rt.inc_schema = schema.project(def.included_columns);
    if (!def.filter.empty()) rt.filter = BoundPredicate(schema, bind_conjunction(schema, def.filter));
    return rt;
  }

  // ---- trace --------------------------------------------------------------

  void emit(TraceKind kind, const std::string& table, std::string detail) {
    TraceEvent e{catalog.next_trace_seq++, kind, table, std::move(detail)};
    if (options.trace_file) {
      if (!trace_out.is_open()) {
        trace_out.open(path.string() + ".trace", std::ios::app);
        if (!trace_out) throw Error(ErrorCode::storage_full, "cannot open trace file");
      }
      trace_out << format_trace_line(e) << '\n';
    }
    if (options.keep_trace) events.push_back(std::move(e));
  }

  // ---- keys and entries ---------------------------------------------------

  EncodedKey key_of(const IndexRt& rt, const Row& row) {
    EncodedKey k;
    for (auto i : rt.key_idx) append_key_value(k, row[i]);
    return k;
  }

  bool in_filter(const IndexRt& rt, const Row& row) { return !rt.filter || rt.filter->matches(row); }

  std::optional<BTreeEntry> nc_entry(const IndexEntry& e, const IndexRt& rt, const Row& row, std::string_view loc) {
    if (!in_filter(rt, row)) return std::nullopt;
    BTreeEntry entry;
    entry.key = key_of(rt, row);
    if (!e.def.unique) entry.key.append(loc);
    std::string inc = rt.inc_idx.empty() ? std::string() : encode_row(rt.inc_schema, project(row, rt.inc_idx));
    entry.value = nc_value(loc, inc);
    return entry;
  }

  std::string clustered_key(const IndexEntry& e, const IndexRt& rt, const Row& row, std::uint64_t uniquifier) {
    std::string k = key_of(rt, row);
    if (!e.def.unique) k += be64(uniquifier);
    return k;
  }

  // ---- base storage -------------------------------------------------------

  std::string base_insert(TableEntry& t, const Row& row) {
    auto& rt = trt(t.def.name);
    std::string loc;
    if (const IndexEntry* c = catalog.clustered_index(t.def.name)) {
      auto* ce = catalog.find_index(c->def.name);
      loc = clustered_key(*ce, irt(ce->def.name), row, ce->storage.next_uniquifier);
      if (!ce->def.unique) ++ce->storage.next_uniquifier;
      tree(*ce).insert(loc, encode_row(t.def.schema, row));
    } else {
      loc = encode_rid(rt.heap->insert(encode_row(t.def.schema, row)));
    }
    if (rt.cached) rt.cache[loc] = row;
    rt.sorted.clear();
    return loc;
  }

  void base_erase(TableEntry& t, const std::string& loc) {
    auto& rt = trt(t.def.name);
    if (const IndexEntry* c = catalog.clustered_index(t.def.name)) tree(*c).erase(loc);
    else rt.heap->erase(decode_rid(loc));
    if (rt.cached) rt.cache.erase(loc);
    rt.sorted.clear();
  }

  void base_update(TableEntry& t, const std::string& loc, const Row& row) {
    auto& rt = trt(t.def.name);
    if (const IndexEntry* c = catalog.clustered_index(t.def.name)) tree(*c).replace(loc, encode_row(t.def.schema, row));
    else rt.heap->update(decode_rid(loc), encode_row(t.def.schema, row));
    if (rt.cached) rt.cache[loc] = row;
    rt.sorted.clear();
  }

  Row base_fetch(TableEntry& t, std::string_view loc) {
    if (const IndexEntry* c = catalog.clustered_index(t.def.name)) {
      auto v = tree(*c).find(loc);
      if (!v) throw Error(ErrorCode::row_not_found, "clustered locator does not resolve");
      return decode_row(t.def.schema, *v);
    }
    return decode_row(t.def.schema, trt(t.def.name).heap->fetch(decode_rid(loc)));
  }

  void base_scan(TableEntry& t, const std::function<void(std::string_view loc, Row row)>& visit) {
    if (const IndexEntry* c = catalog.clustered_index(t.def.name)) {
      tree(*c).scan(std::nullopt, std::nullopt, [&](std::string_view k, std::string_view v) {
        visit(k, decode_row(t.def.schema, v));
        return true;
      });
    } else {
      trt(t.def.name).heap->scan([&](Rid rid, std::string_view bytes) {
        visit(encode_rid(rid), decode_row(t.def.schema, bytes));
      });
    }
  }

  std::vector<Match> base_matches(TableEntry& t) {
    std::vector<Match> out;
    base_scan(t, [&](std::string_view loc, Row row) { out.push_back({std::string(loc), std::move(row)}); });
    return out;
  }

  TableRt& ensure_cache(TableEntry& t) {
    auto& rt = trt(t.def.name);
    if (!rt.cached) {
      rt.cache.clear();
      rt.sorted.clear();
      base_scan(t, [&](std::string_view loc, Row row) { rt.cache.emplace(std::string(loc), std::move(row)); });
      rt.cached = true;
    }
    return rt;
  }

  static std::optional<std::string> single_column(const Conjunction& conj) {
    if (conj.empty()) return std::nullopt;
    for (const auto& a : conj) {
      if (a.column != conj.front().column) return std::nullopt;
    }
    return conj.front().column;
  }

  // Rows whose value in `col` lies in `r`, by binary search over the sorted column.
  static std::uint64_t count_in_range(TableRt& rt, std::size_t col, const ColumnRange& r) {
    auto [it, fresh] = rt.sorted.try_emplace(col);
    std::vector<Value>& vals = it->second;
    if (fresh) {
      vals.reserve(rt.cache.size());
      for (const auto& [loc, row] : rt.cache) vals.push_back(row[col]);
      std::sort(vals.begin(), vals.end(), [](const Value& a, const Value& b) { return compare_values(a, b) < 0; });
    }
    if (r.empty) return 0;
    const auto nulls = std::partition_point(vals.begin(), vals.end(), [](const Value& v) { return is_null(v); });
    if (r.null_only) return static_cast<std::uint64_t>(nulls - vals.begin());
    auto less = [](const Value& a, const Value& b) { return compare_values(a, b) < 0; };
    auto first = r.non_null ? nulls : vals.begin();
    auto last = vals.end();
    if (r.lo) first = r.lo_inclusive ? std::lower_bound(first, last, *r.lo, less) : std::upper_bound(first, last, *r.lo, less);
    if (r.hi) last = r.hi_inclusive ? std::upper_bound(first, last, *r.hi, less) : std::lower_bound(first, last, *r.hi, less);
    return first < last ? static_cast<std::uint64_t>(last - first) : 0;
  }

  std::vector<Row> cached_rows(TableEntry& t) {
    auto& rt = ensure_cache(t);
    std::vector<Row> out;
    out.reserve(rt.cache.size());
    for (const auto& [loc, row] : rt.cache) out.push_back(row);
    return out;
  }

  void touch(const std::string& table) { ++trt(table).version; }

  // ---- secondary index maintenance -----------------------------------------

  void index_add(const std::string& name, const Row& row, const std::string& loc) {
    IndexEntry& e = index(name);
    IndexRt& rt = irt(name);
    switch (e.def.kind) {
      case IndexKind::nonclustered:
        if (auto entry = nc_entry(e, rt, row, loc)) tree(e).insert(entry->key, entry->value);
        break;
      case IndexKind::hash: rt.hash->insert(key_of(rt, row), loc); break;
      case IndexKind::columnstore:
        if (in_filter(rt, row)) {
          if (std::size_t n = rt.cs->append(row, loc)) {
            emit(TraceKind::tuple_move, e.def.table, json{{"index", name}, {"rowgroups", n}}.dump());
          }
        }
        break;
      case IndexKind::clustered: break;
    }
  }

  void index_remove(const std::string& name, const Row& row, const std::string& loc) {
    IndexEntry& e = index(name);
    IndexRt& rt = irt(name);
    switch (e.def.kind) {
      case IndexKind::nonclustered:
        if (auto entry = nc_entry(e, rt, row, loc)) tree(e).erase(entry->key);
        break;
      case IndexKind::hash:
        if (!rt.hash->erase(key_of(rt, row), loc)) throw Error(ErrorCode::entry_not_found, "hash entry missing");
        break;
      case IndexKind::columnstore:
        if (in_filter(rt, row) && !rt.cs->erase(loc)) throw Error(ErrorCode::entry_not_found, "columnstore row missing");
        break;
      case IndexKind::clustered: break;
    }
  }

  // Would this index hold a different entry for the new row version?
  bool entry_changes(const std::string& name, const Row& before, const Row& after, const std::string& loc) {
    IndexEntry& e = index(name);
    IndexRt& rt = irt(name);
    switch (e.def.kind) {
      case IndexKind::nonclustered: {
        auto a = nc_entry(e, rt, before, loc);
        auto b = nc_entry(e, rt, after, loc);
        if (a.has_value() != b.has_value()) return true;
        return a && (a->key != b->key || a->value != b->value);
      }
      case IndexKind::hash: return key_of(rt, before) != key_of(rt, after);
      case IndexKind::columnstore: {
        const Schema& s = table(e.def.table).def.schema;
        bool fa = in_filter(rt, before);
        bool fb = in_filter(rt, after);
        if (fa != fb) return true;
        return fa && encode_row(s, before) != encode_row(s, after);
      }
      case IndexKind::clustered: return false;
    }
    return false;
  }

  // ---- statement pre-validation ---------------------------------------------

  std::string future_locator(TableEntry& t, const Row& row, std::uint64_t uniquifier) {
    if (const IndexEntry* c = catalog.clustered_index(t.def.name)) {
      return clustered_key(*c, irt(c->def.name), row, uniquifier);
    }
    return std::string(6, '\0');
  }

  void check_sizes(TableEntry& t, const std::vector<Row>& rows) {
    const IndexEntry* c = catalog.clustered_index(t.def.name);
    for (const auto& row : rows) {
      std::string bytes = encode_row(t.def.schema, row);
      std::string loc = future_locator(t, row, 0);
      if (c) {
        if (loc.size() > BTree::kMaxKeySize || BTree::leaf_record_size(loc.size(), bytes.size()) > BTree::kMaxLeafRecord) {
          throw Error(ErrorCode::entry_too_large, "row of " + std::to_string(bytes.size()) +
                                                      " bytes does not fit a clustered leaf entry");
        }
      } else if (bytes.size() > HeapFile::kMaxRowSize) {
        throw Error(ErrorCode::record_too_large, "row of " + std::to_string(bytes.size()) + " bytes exceeds " +
                                                     std::to_string(HeapFile::kMaxRowSize));
      }
      for (const auto& name : secondary_names(t.def.name)) {
        IndexEntry& e = index(name);
        if (e.def.kind != IndexKind::nonclustered) continue;
        auto entry = nc_entry(e, irt(name), row, loc);
        if (entry && (entry->key.size() > BTree::kMaxKeySize ||
                      BTree::leaf_record_size(entry->key.size(), entry->value.size()) > BTree::kMaxLeafRecord)) {
          throw Error(ErrorCode::entry_too_large, "entry for index '" + name + "' is too large");
        }
      }
    }
  }

  bool key_present(IndexEntry& e, IndexRt& rt, const std::string& key) {
    if (e.def.kind == IndexKind::hash) return !rt.hash->lookup_equal(key).empty();
    return tree(e).find(key).has_value();
  }

  // Final-state uniqueness for a statement that removes `removed` rows and adds `added` rows.
  void check_unique(TableEntry& t, const std::vector<Row>& removed, const std::vector<Row>& added) {
    for (auto& e : catalog.indexes) {
      if (e.def.table != t.def.name || !e.def.unique || e.def.kind == IndexKind::columnstore) continue;
      IndexRt& rt = irt(e.def.name);
      std::unordered_map<std::string, int> gone;
      for (const auto& r : removed) {
        if (in_filter(rt, r)) ++gone[key_of(rt, r)];
      }
      std::unordered_map<std::string, int> seen;
      for (const auto& r : added) {
        if (!in_filter(rt, r)) continue;
        std::string k = key_of(rt, r);
        if (++seen[k] > 1 || (!gone.contains(k) && key_present(e, rt, k))) {
          std::vector<Value> vals = project(r, rt.key_idx);
          std::string shown;
          for (const auto& v : vals) shown += (shown.empty() ? "" : ", ") + render_value(v);
          throw Error(ErrorCode::duplicate_key, "duplicate key (" + shown + ") in unique index '" + e.def.name + "'");
        }
      }
    }
  }

  // ---- DML ----------------------------------------------------------------

  std::uint64_t insert_rows(const std::string& name, std::vector<Row> rows) {
    TableEntry& t = table(name);
    for (auto& r : rows) r = conform_row(t.def.schema, std::move(r));
    check_sizes(t, rows);
    check_unique(t, {}, rows);
    const auto secondaries = secondary_names(name);
    for (const auto& row : rows) {
      std::string loc = base_insert(t, row);
      for (const auto& ix : secondaries) index_add(ix, row, loc);
      emit(TraceKind::insert, name, json{{"row", row_json(t.def.schema, row)}}.dump());
    }
    touch(name);
    return rows.size();
  }

  void apply_erase(TableEntry& t, const std::vector<Match>& matches) {
    const auto secondaries = secondary_names(t.def.name);
    for (const auto& m : matches) {
      for (const auto& ix : secondaries) index_remove(ix, m.row, m.loc);
      base_erase(t, m.loc);
      emit(TraceKind::erase, t.def.name, json{{"row", row_json(t.def.schema, m.row)}}.dump());
    }
    touch(t.def.name);
  }

  void apply_update(TableEntry& t, const std::vector<Match>& matches, const std::vector<Row>& after) {
    std::vector<Row> before;
    for (const auto& m : matches) before.push_back(m.row);
    check_sizes(t, after);
    check_unique(t, before, after);

    const std::string& name = t.def.name;
    const auto secondaries = secondary_names(name);
    const IndexEntry* c = catalog.clustered_index(name);
    std::vector<bool> moves(matches.size(), false);
    std::vector<std::vector<std::string>> touched(matches.size());
    // Phase 1 removes every old entry that changes so that keys swapped between
    // rows of one statement never collide mid-statement.
    for (std::size_t i = 0; i < matches.size(); ++i) {
      const auto& m = matches[i];
      if (c && key_of(irt(c->def.name), m.row) != key_of(irt(c->def.name), after[i])) {
        moves[i] = true;
        for (const auto& ix : secondaries) index_remove(ix, m.row, m.loc);
        base_erase(t, m.loc);
        emit(TraceKind::erase, name, json{{"row", row_json(t.def.schema, m.row)}}.dump());
        continue;
      }
      for (const auto& ix : secondaries) {
        if (entry_changes(ix, m.row, after[i], m.loc)) {
          index_remove(ix, m.row, m.loc);
          touched[i].push_back(ix);
        }
      }
    }
    for (std::size_t i = 0; i < matches.size(); ++i) {
      const auto& m = matches[i];
      if (moves[i]) {
        std::string loc = base_insert(t, after[i]);
        for (const auto& ix : secondaries) index_add(ix, after[i], loc);
        emit(TraceKind::insert, name, json{{"row", row_json(t.def.schema, after[i])}}.dump());
        continue;
      }
      base_update(t, m.loc, after[i]);
      emit(TraceKind::update_in_place, name,
           json{{"old", row_json(t.def.schema, m.row)}, {"new", row_json(t.def.schema, after[i])}}.dump());
      for (const auto& ix : touched[i]) {
        index_add(ix, after[i], m.loc);
        emit(TraceKind::index_maintain, name, json{{"index", ix}}.dump());
      }
    }
    touch(name);
  }

  std::vector<Match> dml_targets(TableEntry& t, const Conjunction& where, const char* verb, PlanExplain* explain_out) {
    Query q{t.def.name, {}, where, std::nullopt};
    PlanExplain ex = plan(q);
    emit(TraceKind::plan_chosen, t.def.name,
         json{{"statement", verb},
              {"plan", std::string(to_string(ex.plan().kind))},
              {"index", ex.plan().index},
              {"est_reads", ex.plan().estimated_reads}}
             .dump());
    std::uint64_t before = pager->counters().logical_reads;
    std::vector<Match> matches;
    std::optional<Value> agg;
    run_plan(t, q, ex.plan(), matches, agg);
    ex.actual_reads = pager->counters().logical_reads - before;
    if (explain_out) *explain_out = std::move(ex);
    return matches;
  }

  std::uint64_t update_rows(const std::string& name, const Conjunction& where, const std::vector<Assignment>& set,
                            PlanExplain* explain_out) {
    TableEntry& t = table(name);
    Conjunction bound = bind_conjunction(t.def.schema, where);
    std::vector<std::pair<std::size_t, Value>> assigns;
    for (const auto& a : set) assigns.emplace_back(t.def.schema.index_of(a.column), a.value);
    auto matches = dml_targets(t, bound, "UPDATE", explain_out);
    std::vector<Row> after;
    for (const auto& m : matches) {
      Row r = m.row;
      for (const auto& [i, v] : assigns) r[i] = v;
      after.push_back(conform_row(t.def.schema, std::move(r)));
    }
    if (!matches.empty()) apply_update(t, matches, after);
    return matches.size();
  }

  std::uint64_t erase_rows(const std::string& name, const Conjunction& where, PlanExplain* explain_out) {
    TableEntry& t = table(name);
    Conjunction bound = bind_conjunction(t.def.schema, where);
    auto matches = dml_targets(t, bound, "DELETE", explain_out);
    if (!matches.empty()) apply_erase(t, matches);
    return matches.size();
  }

  // ---- planning and execution ----------------------------------------------

  const BTreeShape& shape_of(const IndexEntry& e) {
    IndexRt& rt = irt(e.def.name);
    std::uint64_t v = trt(e.def.table).version;
    if (rt.shape_version != v) {
      rt.shape = tree(e).shape();
      rt.shape_version = v;
    }
    return rt.shape;
  }

  Query bind_query(const Query& q) {
    TableEntry& t = table(q.table);
    Query b = q;
    for (const auto& c : b.projected) t.def.schema.index_of(c);
    b.where = bind_conjunction(t.def.schema, q.where);
    if (b.aggregate) {
      if (!b.aggregate->column.empty()) {
        ColumnType type = t.def.schema[t.def.schema.index_of(b.aggregate->column)].type;
        if (b.aggregate->fn == AggregateFn::sum && type != ColumnType::int64 && type != ColumnType::float64) {
          throw Error(ErrorCode::type_mismatch, "SUM needs a numeric column, '" + b.aggregate->column + "' is " +
                                                    std::string(to_string(type)));
        }
      } else if (b.aggregate->fn == AggregateFn::sum) {
        throw Error(ErrorCode::type_mismatch, "SUM needs a column");
      }
    }
    return b;
  }

  std::vector<AccessPlan> candidates(const Query& bound) { return candidates_in(bound, catalog, nullptr); }

  // Plans over `cat` (the live catalog or a copy holding one hypothetical
  // index, whose facts are supplied).
  std::vector<AccessPlan> candidates_in(const Query& bound, const Catalog& cat, const IndexFacts* hypothetical) {
    TableEntry& t = table(bound.table);
    TableRt& rt = ensure_cache(t);
    PlanningInput in;
    in.schema = &t.def.schema;
    in.table.organization = cat.organization(t.def.name);
    in.table.rows = rt.cache.size();
    in.table.heap_pages = in.table.organization == catalog.organization(t.def.name) ? rt.heap->pages().size() : 0;
    in.table.forwarded_rows = rt.heap->forwarded_rows();
    for (const auto* e : cat.indexes_of(t.def.name)) {
      if (hypothetical && e->def.name == hypothetical->def->name) {
        IndexFacts f = *hypothetical;
        f.def = &e->def;
        in.indexes.push_back(f);
        continue;
      }
      IndexFacts f;
      f.def = &e->def;
      const IndexEntry& live = index(e->def.name);
      switch (e->def.kind) {
        case IndexKind::clustered:
        case IndexKind::nonclustered: f.shape = shape_of(live); break;
        case IndexKind::hash: f.chain = irt(e->def.name).hash->chain_stats(); break;
        case IndexKind::columnstore:
          f.rowgroups = &irt(e->def.name).cs->rowgroups();
          f.delta_pages = irt(e->def.name).cs->delta_pages();
          break;
      }
      in.indexes.push_back(f);
    }
    std::map<std::string, std::uint64_t> memo;
    in.count = [&](const Conjunction& conj) -> std::uint64_t {
      std::string key = render_conjunction(conj);
      if (auto it = memo.find(key); it != memo.end()) return it->second;
      std::uint64_t n = 0;
      if (auto col = single_column(conj)) {
        n = count_in_range(rt, t.def.schema.index_of(*col), column_range(conj, *col));
      } else {
        BoundPredicate p(t.def.schema, conj);
        for (const auto& [loc, row] : rt.cache) {
          if (p.matches(row)) ++n;
        }
      }
      memo[key] = n;
      return n;
    };
    return pdex::enumerate(bound, cat, in);
  }

  std::vector<AccessPlan> what_if(const Query& bound, const IndexDef& def) {
    validate_index_def(catalog, def);
    if (def.kind != IndexKind::clustered && def.kind != IndexKind::nonclustered) {
      throw Error(ErrorCode::invalid_index_def, "what-if supports B-tree indexes only");
    }
    TableEntry& t = table(def.table);
    TableRt& rt = ensure_cache(t);
    IndexEntry probe{def, {}};
    IndexRt hrt = make_runtime(t, def);
    const IndexEntry* c = catalog.clustered_index(def.table);
    double rec_total = 0;
    double key_total = 0;
    std::uint64_t n = 0;
    for (const auto& [loc, row] : rt.cache) {
      if (def.kind == IndexKind::clustered) {
        std::string k = clustered_key(probe, hrt, row, 0);
        rec_total += static_cast<double>(BTree::leaf_record_size(k.size(), encode_row(t.def.schema, row).size()));
        key_total += static_cast<double>(k.size());
        ++n;
      } else {
        std::string hloc = c ? loc : std::string(6, '\0');
        if (auto entry = nc_entry(probe, hrt, row, hloc)) {
          rec_total += static_cast<double>(BTree::leaf_record_size(entry->key.size(), entry->value.size()));
          key_total += static_cast<double>(entry->key.size());
          ++n;
        }
      }
    }
    IndexFacts f;
    f.def = &def;
    f.shape = n == 0 ? BTreeShape{} : estimate_shape(n, rec_total / n, key_total / n, def.fill_factor);
    Catalog copy = catalog;
    copy.indexes.push_back(probe);
    return candidates_in(bound, copy, &f);
  }

  PlanExplain plan(const Query& bound) {
    PlanExplain ex;
    ex.candidates = candidates(bound);
    ex.chosen = 0;
    return ex;
  }

  void run_plan(TableEntry& t, const Query& q, const AccessPlan& plan, std::vector<Match>& out,
                std::optional<Value>& agg) {
    const Schema& schema = t.def.schema;
    BoundPredicate pred(schema, q.where);
    auto keep = [&](std::string_view loc, Row row) {
      if (pred.matches(row)) out.push_back({std::string(loc), std::move(row)});
    };
    switch (plan.kind) {
      case PlanKind::heap_scan:
        trt(t.def.name).heap->scan([&](Rid rid, std::string_view bytes) { keep(encode_rid(rid), decode_row(schema, bytes)); });
        break;
      case PlanKind::clustered_scan:
      case PlanKind::clustered_seek: {
        if (plan.range.empty) break;
        std::optional<std::string_view> lo, hi;
        if (plan.kind == PlanKind::clustered_seek) {
          if (plan.range.lo) lo = *plan.range.lo;
          if (plan.range.hi) hi = *plan.range.hi;
        }
        tree(index(plan.index)).scan(lo, hi, [&](std::string_view k, std::string_view v) {
          keep(k, decode_row(schema, v));
          return true;
        });
        break;
      }
      case PlanKind::nc_covering_seek:
      case PlanKind::nc_seek_lookup: {
        if (plan.range.empty) break;
        IndexEntry& e = index(plan.index);
        IndexRt& rt = irt(plan.index);
        Conjunction local;
        for (const auto& a : q.where) {
          auto idx = schema.index_of(a.column);
          if (std::find(rt.key_idx.begin(), rt.key_idx.end(), idx) != rt.key_idx.end() ||
              std::find(rt.inc_idx.begin(), rt.inc_idx.end(), idx) != rt.inc_idx.end()) {
            local.push_back(a);
          }
        }
        BoundPredicate local_pred(schema, local);
        std::optional<std::string_view> lo, hi;
        if (plan.range.lo) lo = *plan.range.lo;
        if (plan.range.hi) hi = *plan.range.hi;
        std::vector<std::string> lookups;
        tree(e).scan(lo, hi, [&](std::string_view k, std::string_view v) {
          Row row(schema.size());
          auto keys = decode_key(rt.key_types, k);
          for (std::size_t i = 0; i < keys.size(); ++i) row[rt.key_idx[i]] = std::move(keys[i]);
          auto [loc, inc] = split_nc_value(v);
          if (!rt.inc_idx.empty()) {
            Row incv = decode_row(rt.inc_schema, inc);
            for (std::size_t i = 0; i < incv.size(); ++i) row[rt.inc_idx[i]] = std::move(incv[i]);
          }
          if (!local_pred.matches(row)) return true;
          if (plan.covering) keep(loc, std::move(row));
          else lookups.emplace_back(loc);
          return true;
        });
        for (const auto& loc : lookups) keep(loc, base_fetch(t, loc));
        break;
      }
      case PlanKind::hash_probe: {
        IndexRt& rt = irt(plan.index);
        ProbeStats ps;
        auto locs = rt.hash->lookup_equal(plan.probe_key, &ps);
        pager->charge_reads(ps.buckets_probed + ps.entries_examined);
        for (const auto& loc : locs) {
          if (plan.covering) {
            Row row(schema.size());
            auto keys = decode_key(rt.key_types, plan.probe_key);
            for (std::size_t i = 0; i < keys.size(); ++i) row[rt.key_idx[i]] = std::move(keys[i]);
            keep(loc, std::move(row));
          } else {
            keep(loc, base_fetch(t, loc));
          }
        }
        break;
      }
      case PlanKind::columnstore_scan: {
        if (!q.aggregate) throw Error(ErrorCode::invalid_index_def, "columnstore plans answer aggregates only");
        agg = irt(plan.index).cs->aggregate(q.aggregate->column, q.aggregate->fn, q.where, true);
        break;
      }
    }
  }

  QueryResult execute_with(const Query& bound, PlanExplain ex, std::size_t which) {
    TableEntry& t = table(bound.table);
    const Schema& schema = t.def.schema;
    QueryResult result;
    ex.chosen = which;
    std::vector<Match> matches;
    std::optional<Value> agg;
    std::uint64_t before = pager->counters().logical_reads;
    run_plan(t, bound, ex.candidates.at(which), matches, agg);
    ex.actual_reads = pager->counters().logical_reads - before;
    if (bound.aggregate) {
      result.columns = {aggregate_label(*bound.aggregate)};
      if (!agg) {
        std::optional<std::size_t> col;
        ColumnType type = ColumnType::int64;
        if (!bound.aggregate->column.empty()) {
          col = schema.index_of(bound.aggregate->column);
          type = schema[*col].type;
        }
        agg = aggregate_rows(bound.aggregate->fn, col, type, matches);
      }
      result.rows.push_back(Row{*agg});
    } else {
      std::vector<std::size_t> idx;
      if (bound.projected.empty()) {
        for (std::size_t i = 0; i < schema.size(); ++i) idx.push_back(i);
      } else {
        idx = ordinals(schema, bound.projected);
      }
      for (auto i : idx) result.columns.push_back(schema[i].name);
      result.rows.reserve(matches.size());
      for (const auto& m : matches) result.rows.push_back(project(m.row, idx));
    }
    result.explain = std::move(ex);
    return result;
  }

  // ---- DDL ----------------------------------------------------------------

  void build_index(IndexEntry& e) {
    TableEntry& t = table(e.def.table);
    IndexRt rt = make_runtime(t, e.def);
    auto rows = base_matches(t);
    switch (e.def.kind) {
      case IndexKind::nonclustered: {
        std::vector<BTreeEntry> entries;
        for (const auto& m : rows) {
          if (auto entry = nc_entry(e, rt, m.row, m.loc)) entries.push_back(std::move(*entry));
        }
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
        e.storage.root = BTree::bulk_build(*pager, e.def.unique, e.def.fill_factor, entries).root().page_number;
        break;
      }
      case IndexKind::hash: {
        std::size_t buckets = e.def.buckets ? e.def.buckets : std::max<std::size_t>(1024, rows.size());
        rt.hash = std::make_unique<HashIndex>(buckets, e.def.unique);
        for (const auto& m : rows) rt.hash->insert(key_of(rt, m.row), m.loc);
        break;
      }
      case IndexKind::columnstore: {
        rt.cs = std::make_unique<Columnstore>(*pager, t.def.schema, options.columnstore_threshold);
        for (const auto& m : rows) {
          if (in_filter(rt, m.row)) rt.cs->append(m.row, m.loc);
        }
        break;
      }
      case IndexKind::clustered: break;
    }
    indexes[e.def.name] = std::move(rt);
  }

  // Moves the base rows of `table` into a new organization and rebuilds the
  // secondary indexes, whose locators change with it.
  void reorganize(TableEntry& t, std::vector<Match> rows, IndexEntry* clustered) {
    auto& rt = trt(t.def.name);
    if (clustered) {
      IndexRt crt = make_runtime(t, clustered->def);
      std::vector<BTreeEntry> entries;
      entries.reserve(rows.size());
      for (const auto& m : rows) {
        entries.push_back(
            {clustered_key(*clustered, crt, m.row, clustered->storage.next_uniquifier), encode_row(t.def.schema, m.row)});
        if (!clustered->def.unique) ++clustered->storage.next_uniquifier;
      }
      std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
      clustered->storage.root = BTree::bulk_build(*pager, clustered->def.unique, clustered->def.fill_factor, entries)
                                    .root()
                                    .page_number;
      rt.heap->reset();
      indexes[clustered->def.name] = std::move(crt);
    } else {
      rt.heap->reset();
      for (const auto& m : rows) rt.heap->insert(encode_row(t.def.schema, m.row));
    }
    rt.cached = false;
    ++rt.version;
  }

  void create_index(IndexDef def) {
    validate_index_def(catalog, def);
    if (def.kind == IndexKind::hash && def.buckets == 0) {
      def.buckets = std::max<std::size_t>(1024, ensure_cache(table(def.table)).cache.size());
    }
    TableEntry& t = table(def.table);
    const std::string name = def.name;
    const std::string tname = def.table;
    if (def.kind == IndexKind::clustered) {
      auto rows = base_matches(t);
      // Validate keys and sizes before anything is written.
      IndexEntry probe{def, {}};
      IndexRt crt = make_runtime(t, def);
      std::vector<std::string> keys;
      for (const auto& m : rows) {
        std::string k = clustered_key(probe, crt, m.row, 0);
        std::string bytes = encode_row(t.def.schema, m.row);
        if (k.size() > BTree::kMaxKeySize || BTree::leaf_record_size(k.size(), bytes.size()) > BTree::kMaxLeafRecord) {
          throw Error(ErrorCode::entry_too_large, "row too large for a clustered leaf entry");
        }
        keys.push_back(std::move(k));
      }
      if (def.unique) {
        std::sort(keys.begin(), keys.end());
        if (std::adjacent_find(keys.begin(), keys.end()) != keys.end()) {
          throw Error(ErrorCode::duplicate_key, "existing rows contain duplicate keys for unique index '" + name + "'");
        }
      }
      catalog.indexes.push_back(IndexEntry{def, {}});
      try {
        reorganize(table(tname), std::move(rows), &index(name));
      } catch (...) {
        catalog.indexes.pop_back();
        indexes.erase(name);
        throw;
      }
      for (const auto& ix : secondary_names(tname)) build_index(index(ix));
    } else {
      catalog.indexes.push_back(IndexEntry{def, {}});
      try {
        build_index(catalog.indexes.back());
      } catch (...) {
        catalog.indexes.pop_back();
        indexes.erase(name);
        throw;
      }
    }
    flush();
  }

  void drop_index(const std::string& name) {
    IndexEntry& e = index(name);
    const std::string tname = e.def.table;
    TableEntry& t = table(tname);
    if (t.def.primary_key == e.def.key_columns && e.def.unique && name == "pk_" + tname) t.def.primary_key.clear();
    if (e.def.kind == IndexKind::clustered) {
      auto rows = base_matches(t);
      catalog.indexes.erase(catalog.indexes.begin() + (&e - catalog.indexes.data()));
      indexes.erase(name);
      reorganize(table(tname), std::move(rows), nullptr);
      for (const auto& ix : secondary_names(tname)) build_index(index(ix));
    } else {
      catalog.indexes.erase(catalog.indexes.begin() + (&e - catalog.indexes.data()));
      indexes.erase(name);
    }
    flush();
  }

  void create_table(TableDef def) {
    validate_table_def(catalog, def);
    if (!def.primary_key.empty() && catalog.find_index("pk_" + def.name)) {
      throw Error(ErrorCode::duplicate_name, "index 'pk_" + def.name + "' exists");
    }
    std::vector<Column> cols = def.schema.columns();
    for (auto& c : cols) {
      if (std::find(def.primary_key.begin(), def.primary_key.end(), c.name) != def.primary_key.end()) c.nullable = false;
    }
    def.schema = Schema(std::move(cols));
    const std::string name = def.name;
    auto pk = def.primary_key;
    catalog.tables.push_back(TableEntry{std::move(def), {}});
    TableRt rt;
    rt.heap = std::make_unique<HeapFile>(*pager);
    tables[name] = std::move(rt);
    if (!pk.empty()) {
      IndexDef idx;
      idx.name = "pk_" + name;
      idx.table = name;
      idx.kind = IndexKind::clustered;
      idx.key_columns = pk;
      idx.unique = true;
      create_index(idx);
    }
    flush();
  }

  void declare_primary_key(const std::string& tname, std::vector<std::string> cols) {
    TableEntry& t = table(tname);
    if (!t.def.primary_key.empty()) throw Error(ErrorCode::invalid_index_def, "table '" + tname + "' already has a primary key");
    if (cols.empty()) throw Error(ErrorCode::invalid_index_def, "primary key needs at least one column");
    auto idx = ordinals(t.def.schema, cols);
    for (const auto& row : cached_rows(t)) {
      for (auto i : idx) {
        if (is_null(row[i])) throw Error(ErrorCode::schema_mismatch, "primary key column '" + t.def.schema[i].name + "' holds NULL");
      }
    }
    IndexDef def;
    def.name = "pk_" + tname;
    def.table = tname;
    def.kind = catalog.clustered_index(tname) ? IndexKind::nonclustered : IndexKind::clustered;
    def.key_columns = cols;
    def.unique = true;
    create_index(def);
    TableEntry& t2 = table(tname);
    std::vector<Column> columns = t2.def.schema.columns();
    for (auto i : idx) columns[i].nullable = false;
    t2.def.schema = Schema(std::move(columns));
    t2.def.primary_key = std::move(cols);
    flush();
  }

  // ---- audit ----------------------------------------------------------------

  void audit_table(TableEntry& t, AuditReport& report) {
    auto rows = base_matches(t);
    const std::string& tname = t.def.name;
    auto problem = [&](const std::string& ix, const std::string& what) {
      report.problems.push_back(tname + "." + ix + ": " + what);
    };
    for (const auto* cptr : catalog.indexes_of(tname)) {
      const IndexEntry& e = *cptr;
      IndexRt& rt = irt(e.def.name);
      switch (e.def.kind) {
        case IndexKind::clustered: {
          auto rep = tree(e).validate();
          if (!rep.ok()) problem(e.def.name, std::string(to_string(rep.violation)) + " " + rep.detail);
          for (const auto& m : rows) {
            const std::string k = key_of(rt, m.row);
            const std::size_t extra = e.def.unique ? 0 : 8;
            if (m.loc.size() != k.size() + extra || m.loc.compare(0, k.size(), k) != 0) {
              problem(e.def.name, "stored key does not match row");
              break;
            }
          }
          break;
        }
        case IndexKind::nonclustered: {
          auto rep = tree(e).validate();
          if (!rep.ok()) problem(e.def.name, std::string(to_string(rep.violation)) + " " + rep.detail);
          std::vector<std::pair<std::string, std::string>> expected, actual;
          for (const auto& m : rows) {
            if (auto entry = nc_entry(e, rt, m.row, m.loc)) expected.emplace_back(entry->key, entry->value);
          }
          tree(e).scan(std::nullopt, std::nullopt, [&](std::string_view k, std::string_view v) {
            actual.emplace_back(std::string(k), std::string(v));
            return true;
          });
          std::sort(expected.begin(), expected.end());
          if (expected != actual) {
            problem(e.def.name, "holds " + std::to_string(actual.size()) + " entries, base implies " +
                                    std::to_string(expected.size()) + " (or contents differ)");
          }
          break;
        }
        case IndexKind::hash: {
          std::vector<std::pair<std::string, std::string>> expected, actual;
          for (const auto& m : rows) expected.emplace_back(key_of(rt, m.row), m.loc);
          rt.hash->for_each([&](std::string_view k, std::string_view l) { actual.emplace_back(std::string(k), std::string(l)); });
          std::sort(expected.begin(), expected.end());
          std::sort(actual.begin(), actual.end());
          if (expected != actual) problem(e.def.name, "hash entries differ from base rows");
          break;
        }
        case IndexKind::columnstore: {
          std::vector<std::pair<std::string, std::string>> expected, actual;
          for (const auto& m : rows) {
            if (in_filter(rt, m.row)) expected.emplace_back(encode_row(t.def.schema, m.row), m.loc);
          }
          rt.cs->for_each_row([&](const Row& r, std::string_view l) {
            actual.emplace_back(encode_row(t.def.schema, r), std::string(l));
          });
          std::sort(expected.begin(), expected.end());
          std::sort(actual.begin(), actual.end());
          if (expected != actual) problem(e.def.name, "columnstore rows differ from base rows");
          if (rt.cs->delta_rows() >= rt.cs->threshold()) problem(e.def.name, "deltastore at or above threshold");
          break;
        }
      }
    }
    auto& trt_ = trt(tname);
    if (trt_.cached && trt_.cache.size() != rows.size()) report.problems.push_back(tname + ": row cache out of date");
  }

  // ---- persistence ----------------------------------------------------------

  void load_runtime() {
    for (auto& t : catalog.tables) {
      TableRt rt;
      rt.heap = std::make_unique<HeapFile>(*pager, t.storage.heap_pages, t.storage.heap_spare);
      rt.heap->load();
      tables[t.def.name] = std::move(rt);
    }
    for (auto& e : catalog.indexes) {
      TableEntry& t = table(e.def.table);
      IndexRt rt = make_runtime(t, e.def);
      if (e.def.kind == IndexKind::columnstore) {
        rt.cs = std::make_unique<Columnstore>(*pager, t.def.schema, options.columnstore_threshold, e.storage.columnstore);
        rt.cs->load();
      }
      indexes[e.def.name] = std::move(rt);
    }
    for (auto& e : catalog.indexes) {
      if (e.def.kind != IndexKind::hash) continue;
      IndexRt& rt = irt(e.def.name);
      rt.hash = std::make_unique<HashIndex>(e.def.buckets ? e.def.buckets : 1024, e.def.unique);
      base_scan(table(e.def.table), [&](std::string_view loc, Row row) { rt.hash->insert(key_of(rt, row), loc); });
    }
  }

  void flush() {
    for (auto& t : catalog.tables) {
      auto& rt = trt(t.def.name);
      t.storage.heap_pages = rt.heap->pages();
      t.storage.heap_spare = rt.heap->spare_pages();
    }
    for (auto& e : catalog.indexes) {
      if (e.def.kind == IndexKind::columnstore) e.storage.columnstore = irt(e.def.name).cs->state();
    }
    write_catalog_blob(*pager, serialize_catalog(catalog));
    if (trace_out.is_open()) trace_out.flush();
  }
};

Engine::Engine(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

Engine::~Engine() {
  if (!impl_) return;
  try {
    impl_->flush();
  } catch (...) {
  }
}

Engine Engine::create(const std::filesystem::path& path, EngineOptions options) {
  auto impl = std::make_unique<Impl>();
  impl->path = path;
  impl->options = options;
  impl->pager = std::make_unique<Pager>(Pager::create(path));
  impl->flush();
  return Engine(std::move(impl));
}

Engine Engine::open(const std::filesystem::path& path, EngineOptions options) {
  auto impl = std::make_unique<Impl>();
  impl->path = path;
  impl->options = options;
  impl->pager = std::make_unique<Pager>(Pager::open(path));
  impl->catalog = parse_catalog(read_catalog_blob(*impl->pager));
  impl->load_runtime();
  return Engine(std::move(impl));
}

void Engine::create_table(TableDef def) { impl_->create_table(std::move(def)); }
void Engine::declare_primary_key(const std::string& table, std::vector<std::string> columns) {
  impl_->declare_primary_key(table, std::move(columns));
}
void Engine::create_index(IndexDef def) { impl_->create_index(std::move(def)); }
void Engine::drop_index(const std::string& name) { impl_->drop_index(name); }

std::uint64_t Engine::insert(const std::string& table, Row row) {
  std::vector<Row> rows;
  rows.push_back(std::move(row));
  return impl_->insert_rows(table, std::move(rows));
}
std::uint64_t Engine::insert(const std::string& table, std::vector<Row> rows) {
  return impl_->insert_rows(table, std::move(rows));
}
std::uint64_t Engine::update(const std::string& table, const Conjunction& where, const std::vector<Assignment>& set) {
  return impl_->update_rows(table, where, set, nullptr);
}
std::uint64_t Engine::erase(const std::string& table, const Conjunction& where) {
  return impl_->erase_rows(table, where, nullptr);
}

QueryResult Engine::run(const Statement& statement) {
  if (const auto* q = std::get_if<Query>(&statement)) return execute(*q);
  QueryResult r;
  r.columns = {"affected"};
  if (const auto* ins = std::get_if<InsertStatement>(&statement)) {
    r.affected = impl_->insert_rows(ins->table, ins->rows);
  } else if (const auto* up = std::get_if<UpdateStatement>(&statement)) {
    r.affected = impl_->update_rows(up->table, up->where, up->assignments, &r.explain);
  } else if (const auto* del = std::get_if<DeleteStatement>(&statement)) {
    r.affected = impl_->erase_rows(del->table, del->where, &r.explain);
  }
  r.rows.push_back(Row{static_cast<std::int64_t>(r.affected)});
  return r;
}

QueryResult Engine::execute(const Query& query) {
  Query bound = impl_->bind_query(query);
  return impl_->execute_with(bound, impl_->plan(bound), 0);
}

QueryResult Engine::execute_plan(const Query& query, const AccessPlan& plan) {
  Query bound = impl_->bind_query(query);
  PlanExplain ex;
  ex.candidates = {plan};
  return impl_->execute_with(bound, std::move(ex), 0);
}

PlanExplain Engine::explain(const Query& query) { return impl_->plan(impl_->bind_query(query)); }

std::vector<AccessPlan> Engine::enumerate(const Query& query) { return impl_->candidates(impl_->bind_query(query)); }

std::vector<AccessPlan> Engine::what_if(const Query& query, const IndexDef& hypothetical) {
  return impl_->what_if(impl_->bind_query(query), hypothetical);
}

Ratio Engine::density(const std::string& table, const std::vector<std::string>& columns) {
  TableEntry& t = impl_->table(table);
  auto rows = impl_->cached_rows(t);
  return pdex::density(t.def.schema, rows, columns);
}

SelectivityReport Engine::selectivity(const std::string& table, const Conjunction& predicate) {
  TableEntry& t = impl_->table(table);
  auto rows = impl_->cached_rows(t);
  return pdex::selectivity(t.def.schema, rows, predicate);
}

IndexStats Engine::index_stats(const std::string& name) {
  IndexEntry& e = impl_->index(name);
  TableEntry& t = impl_->table(e.def.table);
  auto& rt = impl_->irt(name);
  IndexStats s;
  std::vector<Row> rows;
  for (auto& r : impl_->cached_rows(t)) {
    if (impl_->in_filter(rt, r)) rows.push_back(std::move(r));
  }
  switch (e.def.kind) {
    case IndexKind::clustered:
    case IndexKind::nonclustered: {
      BTreeShape shape = impl_->shape_of(e);
      s.depth = shape.depth;
      s.leaf_pages = shape.leaf_pages;
      break;
    }
    case IndexKind::hash:
      s.depth = 1;
      s.leaf_pages = 0;
      break;
    case IndexKind::columnstore: {
      s.depth = 1;
      s.leaf_pages = rt.cs->delta_pages();
      for (const auto& rg : rt.cs->rowgroups()) {
        for (const auto& seg : rg.segments) s.leaf_pages += seg.page_count;
      }
      break;
    }
  }
  s.row_count = rows.size();
  if (!rows.empty() && !e.def.key_columns.empty()) s.density = pdex::density(t.def.schema, rows, e.def.key_columns);
  return s;
}

TableInfo Engine::table_info(const std::string& table) {
  TableEntry& t = impl_->table(table);
  auto& rt = impl_->ensure_cache(t);
  TableInfo info;
  info.organization = impl_->catalog.organization(table);
  info.rows = rt.cache.size();
  info.heap_pages = rt.heap->pages().size();
  info.forwarded_rows = rt.heap->forwarded_rows();
  if (const IndexEntry* c = impl_->catalog.clustered_index(table)) {
    info.data_pages = impl_->shape_of(*c).leaf_pages;
  } else {
    info.data_pages = info.heap_pages;
  }
  return info;
}

std::vector<Row> Engine::rows(const std::string& table) {
  std::vector<Row> out;
  for (auto& m : impl_->base_matches(impl_->table(table))) out.push_back(std::move(m.row));
  return out;
}

ValidationReport Engine::validate_index(const std::string& name) {
  IndexEntry& e = impl_->index(name);
  if (e.def.kind == IndexKind::clustered || e.def.kind == IndexKind::nonclustered) return impl_->tree(e).validate();
  return {};
}

AuditReport Engine::audit() {
  AuditReport report;
  for (auto& t : impl_->catalog.tables) impl_->audit_table(t, report);
  return report;
}

BTree Engine::btree(const std::string& name) {
  IndexEntry& e = impl_->index(name);
  if (e.def.kind != IndexKind::clustered && e.def.kind != IndexKind::nonclustered) {
    throw Error(ErrorCode::invalid_index_def, "index '" + name + "' is not a B-tree");
  }
  return impl_->tree(e);
}

const HashIndex& Engine::hash_index(const std::string& name) {
  auto& rt = impl_->irt(impl_->index(name).def.name);
  if (!rt.hash) throw Error(ErrorCode::invalid_index_def, "index '" + name + "' is not a hash index");
  return *rt.hash;
}

Columnstore& Engine::columnstore(const std::string& name) {
  auto& rt = impl_->irt(impl_->index(name).def.name);
  if (!rt.cs) throw Error(ErrorCode::invalid_index_def, "index '" + name + "' is not a columnstore index");
  return *rt.cs;
}

void Engine::replay(const TraceEvent& event) {
  if (event.kind != TraceKind::insert && event.kind != TraceKind::erase && event.kind != TraceKind::update_in_place) {
    return;
  }
  TableEntry& t = impl_->table(event.table);
  json detail;
  try {
    detail = json::parse(event.detail);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("trace detail is not JSON: ") + e.what());
  }
  if (event.kind == TraceKind::insert) {
    insert(event.table, json_row(detail.at("row")));
    return;
  }
  Row target = conform_row(t.def.schema, json_row(detail.at(event.kind == TraceKind::erase ? "row" : "old")));
  std::optional<Match> found;
  impl_->base_scan(t, [&](std::string_view loc, Row row) {
    if (found) return;
    bool same = row.size() == target.size();
    for (std::size_t i = 0; same && i < row.size(); ++i) same = values_equal(row[i], target[i]);
    if (same) found = Match{std::string(loc), std::move(row)};
  });
  if (!found) throw Error(ErrorCode::row_not_found, "trace event #" + std::to_string(event.seq) + " names a missing row");
  std::vector<Match> matches{*found};
  if (event.kind == TraceKind::erase) {
    impl_->apply_erase(t, matches);
  } else {
    impl_->apply_update(t, matches, {conform_row(t.def.schema, json_row(detail.at("new")))});
  }
}

const Catalog& Engine::catalog() const { return impl_->catalog; }
Pager& Engine::pager() { return *impl_->pager; }
const IoCounters& Engine::counters() const { return impl_->pager->counters(); }
const std::vector<TraceEvent>& Engine::trace() const { return impl_->events; }
void Engine::clear_trace() { impl_->events.clear(); }
const std::filesystem::path& Engine::path() const { return impl_->path; }
void Engine::flush() { impl_->flush(); }

}  // namespace pdex
