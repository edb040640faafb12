#include "pdex/catalog.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

#include <json.hpp>

#include "pdex/error.hpp"

namespace pdex {

using nlohmann::json;

std::string_view to_string(IndexKind kind) {
  switch (kind) {
    case IndexKind::clustered: return "clustered";
    case IndexKind::nonclustered: return "nonclustered";
    case IndexKind::hash: return "hash";
    case IndexKind::columnstore: return "columnstore";
  }
  return "?";
}

std::optional<IndexKind> parse_index_kind(std::string_view text) {
  if (text == "clustered") return IndexKind::clustered;
  if (text == "nonclustered") return IndexKind::nonclustered;
  if (text == "hash") return IndexKind::hash;
  if (text == "columnstore") return IndexKind::columnstore;
  return std::nullopt;
}

const TableEntry* Catalog::find_table(std::string_view name) const {
  for (const auto& t : tables) {
    if (t.def.name == name) return &t;
  }
  return nullptr;
}

TableEntry* Catalog::find_table(std::string_view name) {
  return const_cast<TableEntry*>(std::as_const(*this).find_table(name));
}

const IndexEntry* Catalog::find_index(std::string_view name) const {
  for (const auto& i : indexes) {
    if (i.def.name == name) return &i;
  }
  return nullptr;
}

IndexEntry* Catalog::find_index(std::string_view name) {
  return const_cast<IndexEntry*>(std::as_const(*this).find_index(name));
}

const IndexEntry* Catalog::clustered_index(std::string_view table) const {
  for (const auto& i : indexes) {
    if (i.def.table == table && i.def.kind == IndexKind::clustered) return &i;
  }
  return nullptr;
}

Organization Catalog::organization(std::string_view table) const {
  return clustered_index(table) ? Organization::clustered : Organization::heap;
}

std::vector<const IndexEntry*> Catalog::indexes_of(std::string_view table) const {
  std::vector<const IndexEntry*> out;
  for (const auto& i : indexes) {
    if (i.def.table == table) out.push_back(&i);
  }
  return out;
}

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::invalid_index_def, msg); }

bool has_duplicates(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) != v.end();
}

}  // namespace

void validate_table_def(const Catalog& catalog, const TableDef& def) {
  if (def.name.empty()) throw Error(ErrorCode::schema_mismatch, "table name is empty");
  if (catalog.find_table(def.name)) throw Error(ErrorCode::duplicate_name, "table '" + def.name + "' exists");
  if (def.schema.size() == 0) throw Error(ErrorCode::schema_mismatch, "table needs at least one column");
  std::vector<std::string> names;
  for (const auto& c : def.schema.columns()) {
    if (c.name.empty()) throw Error(ErrorCode::schema_mismatch, "empty column name");
    names.push_back(c.name);
  }
  if (has_duplicates(names)) throw Error(ErrorCode::duplicate_name, "duplicate column name in '" + def.name + "'");
  if (has_duplicates(def.primary_key)) throw Error(ErrorCode::schema_mismatch, "duplicate PRIMARY KEY column");
  for (const auto& k : def.primary_key) {
    auto idx = def.schema.find(k);
    if (!idx) throw Error(ErrorCode::not_found, "PRIMARY KEY column '" + k + "' does not exist");
    if (def.schema[*idx].type == ColumnType::blob) {
      throw Error(ErrorCode::blob_key_column, "blob column '" + k + "' cannot be specified as an index key column");
    }
  }
}

void validate_index_def(const Catalog& catalog, const IndexDef& def) {
  if (def.name.empty()) invalid("index name is empty");
  if (catalog.find_index(def.name)) throw Error(ErrorCode::duplicate_name, "index '" + def.name + "' exists");
  const TableEntry* table = catalog.find_table(def.table);
  if (!table) throw Error(ErrorCode::not_found, "no table '" + def.table + "'");
  const Schema& schema = table->def.schema;

  if (def.key_columns.empty() && def.kind != IndexKind::columnstore) invalid("index needs at least one key column");
  if (has_duplicates(def.key_columns)) invalid("repeated key column");
  if (has_duplicates(def.included_columns)) invalid("repeated included column");
  for (const auto& c : def.key_columns) {
    auto idx = schema.find(c);
    if (!idx) throw Error(ErrorCode::not_found, "no column '" + c + "' in '" + def.table + "'");
    if (schema[*idx].type == ColumnType::blob && def.kind != IndexKind::columnstore) {
      throw Error(ErrorCode::blob_key_column, "blob column '" + c + "' cannot be specified as an index key column");
    }
  }
  for (const auto& c : def.included_columns) {
    if (!schema.find(c)) throw Error(ErrorCode::not_found, "no column '" + c + "' in '" + def.table + "'");
    if (std::find(def.key_columns.begin(), def.key_columns.end(), c) != def.key_columns.end()) {
      invalid("column '" + c + "' is both key and included");
    }
  }
  if (!def.included_columns.empty() && def.kind != IndexKind::nonclustered) {
    invalid("included columns are only allowed on nonclustered indexes");
  }
  if (!def.filter.empty()) {
    if (def.kind != IndexKind::nonclustered && def.kind != IndexKind::columnstore) {
      invalid("filters are only allowed on nonclustered or columnstore indexes");
    }
    bind_conjunction(schema, def.filter);
  }
  if (!(def.fill_factor >= 0.5 && def.fill_factor <= 1.0)) invalid("fill factor must be within [0.5, 1.0]");
  if (def.buckets != 0 && def.kind != IndexKind::hash) invalid("bucket count applies to hash indexes only");
  if (def.kind == IndexKind::clustered && catalog.clustered_index(def.table)) {
    throw Error(ErrorCode::second_clustered_index,
                "table '" + def.table + "' already has clustered index '" + catalog.clustered_index(def.table)->def.name + "'");
  }
  if (def.kind == IndexKind::columnstore) {
    if (def.unique) invalid("columnstore indexes cannot be unique");
    for (const auto* i : catalog.indexes_of(def.table)) {
      if (i->def.kind == IndexKind::columnstore) invalid("table already has a columnstore index");
    }
  }
}

namespace {

std::string to_hex(std::string_view s) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() * 2);
  for (unsigned char c : s) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

std::string from_hex(std::string_view h) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw Error(ErrorCode::bad_file, "bad hex in catalog");
  };
  std::string out;
  for (std::size_t i = 0; i + 1 < h.size(); i += 2) out.push_back(static_cast<char>(nibble(h[i]) * 16 + nibble(h[i + 1])));
  return out;
}

json value_json(const Value& v) {
  switch (v.index()) {
    case 0: return nullptr;
    case 1: return json::array({"i", std::get<1>(v)});
    case 2: return json::array({"f", std::bit_cast<std::uint64_t>(std::get<2>(v))});
    default: return json::array({"s", to_hex(std::get<3>(v))});
  }
}

Value json_value(const json& j) {
  if (j.is_null()) return Value{};
  const auto tag = j.at(0).get<std::string>();
  if (tag == "i") return j.at(1).get<std::int64_t>();
  if (tag == "f") return std::bit_cast<double>(j.at(1).get<std::uint64_t>());
  return from_hex(j.at(1).get<std::string>());
}

const char* op_name(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "eq";
    case CompareOp::lt: return "lt";
    case CompareOp::gt: return "gt";
    case CompareOp::between: return "between";
    case CompareOp::is_null: return "is_null";
    case CompareOp::is_not_null: return "is_not_null";
  }
  return "?";
}

CompareOp parse_op(const std::string& s) {
  for (auto op : {CompareOp::eq, CompareOp::lt, CompareOp::gt, CompareOp::between, CompareOp::is_null,
                  CompareOp::is_not_null}) {
    if (s == op_name(op)) return op;
  }
  throw Error(ErrorCode::bad_file, "unknown operator in catalog: " + s);
}

json conjunction_json(const Conjunction& c) {
  json out = json::array();
  for (const auto& a : c) {
    out.push_back({{"column", a.column}, {"op", op_name(a.op)}, {"lo", value_json(a.lo)}, {"hi", value_json(a.hi)}});
  }
  return out;
}

Conjunction json_conjunction(const json& j) {
  Conjunction c;
  for (const auto& a : j) {
    c.push_back(Atom{a.at("column").get<std::string>(), parse_op(a.at("op").get<std::string>()), json_value(a.at("lo")),
                     json_value(a.at("hi"))});
  }
  return c;
}

json columnstore_json(const ColumnstoreState& s) {
  json rgs = json::array();
  for (const auto& rg : s.rowgroups) {
    json segs = json::array();
    for (const auto& seg : rg.segments) {
      segs.push_back({{"encoding", static_cast<int>(seg.encoding)},
                      {"first_page", seg.first_page},
                      {"page_count", seg.page_count},
                      {"byte_length", seg.byte_length},
                      {"min", value_json(seg.min)},
                      {"max", value_json(seg.max)},
                      {"null_count", seg.null_count}});
    }
    rgs.push_back({{"id", rg.id}, {"row_count", rg.row_count}, {"segments", segs}, {"deleted", rg.deleted}});
  }
  return {{"rowgroups", rgs}, {"delta_pages", s.delta_pages}, {"delta_spare", s.delta_spare}};
}

ColumnstoreState json_columnstore(const json& j) {
  ColumnstoreState s;
  for (const auto& r : j.at("rowgroups")) {
    RowGroupInfo rg;
    rg.id = r.at("id").get<std::uint32_t>();
    rg.row_count = r.at("row_count").get<std::uint32_t>();
    rg.deleted = r.at("deleted").get<std::vector<std::uint32_t>>();
    for (const auto& g : r.at("segments")) {
      SegmentInfo seg;
      seg.encoding = static_cast<SegmentEncoding>(g.at("encoding").get<int>());
      seg.first_page = g.at("first_page").get<std::uint32_t>();
      seg.page_count = g.at("page_count").get<std::uint32_t>();
      seg.byte_length = g.at("byte_length").get<std::uint32_t>();
      seg.min = json_value(g.at("min"));
      seg.max = json_value(g.at("max"));
      seg.null_count = g.at("null_count").get<std::uint32_t>();
      rg.segments.push_back(std::move(seg));
    }
    s.rowgroups.push_back(std::move(rg));
  }
  s.delta_pages = j.at("delta_pages").get<std::vector<std::uint32_t>>();
  s.delta_spare = j.at("delta_spare").get<std::vector<std::uint32_t>>();
  return s;
}

}  // namespace

std::string serialize_catalog(const Catalog& catalog) {
  json tables = json::array();
  for (const auto& t : catalog.tables) {
    json cols = json::array();
    for (const auto& c : t.def.schema.columns()) {
      cols.push_back({{"name", c.name}, {"type", std::string(to_string(c.type))}, {"nullable", c.nullable}});
    }
    tables.push_back({{"name", t.def.name},
                      {"columns", cols},
                      {"primary_key", t.def.primary_key},
                      {"heap_pages", t.storage.heap_pages},
                      {"heap_spare", t.storage.heap_spare}});
  }
  json indexes = json::array();
  for (const auto& i : catalog.indexes) {
    json entry = {{"name", i.def.name},
                  {"table", i.def.table},
                  {"kind", std::string(to_string(i.def.kind))},
                  {"key", i.def.key_columns},
                  {"include", i.def.included_columns},
                  {"unique", i.def.unique},
                  {"filter", conjunction_json(i.def.filter)},
                  {"fill_factor", i.def.fill_factor},
                  {"buckets", i.def.buckets},
                  {"root", i.storage.root},
                  {"next_uniquifier", i.storage.next_uniquifier}};
    if (i.def.kind == IndexKind::columnstore) entry["columnstore"] = columnstore_json(i.storage.columnstore);
    indexes.push_back(std::move(entry));
  }
  json doc = {{"version", 1}, {"next_trace_seq", catalog.next_trace_seq}, {"tables", tables}, {"indexes", indexes}};
  return doc.dump();
}

Catalog parse_catalog(std::string_view blob) {
  Catalog catalog;
  if (blob.empty()) return catalog;
  json doc;
  try {
    doc = json::parse(blob);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_file, std::string("catalog is not valid JSON: ") + e.what());
  }
  try {
    catalog.next_trace_seq = doc.at("next_trace_seq").get<std::uint64_t>();
    for (const auto& t : doc.at("tables")) {
      TableEntry entry;
      entry.def.name = t.at("name").get<std::string>();
      std::vector<Column> cols;
      for (const auto& c : t.at("columns")) {
        auto type = parse_column_type(c.at("type").get<std::string>());
        if (!type) throw Error(ErrorCode::bad_file, "unknown column type in catalog");
        cols.push_back(Column{c.at("name").get<std::string>(), *type, c.at("nullable").get<bool>()});
      }
      entry.def.schema = Schema(std::move(cols));
      entry.def.primary_key = t.at("primary_key").get<std::vector<std::string>>();
      entry.storage.heap_pages = t.at("heap_pages").get<std::vector<std::uint32_t>>();
      entry.storage.heap_spare = t.at("heap_spare").get<std::vector<std::uint32_t>>();
      catalog.tables.push_back(std::move(entry));
    }
    for (const auto& i : doc.at("indexes")) {
      IndexEntry entry;
      entry.def.name = i.at("name").get<std::string>();
      entry.def.table = i.at("table").get<std::string>();
      auto kind = parse_index_kind(i.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::bad_file, "unknown index kind in catalog");
      entry.def.kind = *kind;
      entry.def.key_columns = i.at("key").get<std::vector<std::string>>();
      entry.def.included_columns = i.at("include").get<std::vector<std::string>>();
      entry.def.unique = i.at("unique").get<bool>();
      entry.def.filter = json_conjunction(i.at("filter"));
      entry.def.fill_factor = i.at("fill_factor").get<double>();
      entry.def.buckets = i.at("buckets").get<std::size_t>();
      entry.storage.root = i.at("root").get<std::uint32_t>();
      entry.storage.next_uniquifier = i.at("next_uniquifier").get<std::uint64_t>();
      if (i.contains("columnstore")) entry.storage.columnstore = json_columnstore(i.at("columnstore"));
      catalog.indexes.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_file, std::string("malformed catalog: ") + e.what());
  }
  return catalog;
}

namespace {
constexpr std::size_t kChunkLength = header::reserved;      // u32
constexpr std::size_t kTotalLength = header::reserved + 4;  // u32, page 0 only
}  // namespace

void write_catalog_blob(Pager& pager, std::string_view blob) {
  std::vector<Page> chain;
  chain.push_back(pager.read_page(page_id(0)));
  while (auto next = chain.back().right_sibling()) chain.push_back(pager.read_page(*next));

  const std::size_t needed = std::max<std::size_t>(1, (blob.size() + kPageBodySize - 1) / kPageBodySize);
  while (chain.size() < needed) {
    PageId id = pager.allocate_page(PageKind::catalog);
    chain.back().set_right_sibling(id);
    chain.emplace_back(id, PageKind::catalog);
  }
  chain.front().put_u32(kTotalLength, static_cast<std::uint32_t>(blob.size()));
  for (std::size_t i = 0; i < chain.size(); ++i) {
    Page& p = chain[i];
    std::size_t start = std::min(blob.size(), i * kPageBodySize);
    auto chunk = blob.substr(start, kPageBodySize);
    std::memset(p.bytes().data() + kPageHeaderSize, 0, kPageBodySize);
    std::memcpy(p.bytes().data() + kPageHeaderSize, chunk.data(), chunk.size());
    p.put_u32(kChunkLength, static_cast<std::uint32_t>(chunk.size()));
    pager.write_page(p);
  }
}

std::string read_catalog_blob(Pager& pager) {
  Page p = pager.read_page(page_id(0));
  const std::size_t total = p.u32(kTotalLength);
  std::string blob;
  blob.reserve(total);
  for (;;) {
    std::size_t len = std::min<std::size_t>(p.u32(kChunkLength), kPageBodySize);
    len = std::min(len, total - blob.size());
    blob.append(reinterpret_cast<const char*>(p.bytes().data()) + kPageHeaderSize, len);
    auto next = p.right_sibling();
    if (blob.size() >= total || !next) break;
    p = pager.read_page(*next);
  }
  if (blob.size() != total) throw Error(ErrorCode::bad_file, "catalog chain is shorter than its recorded length");
  return blob;
}

}  // namespace pdex
