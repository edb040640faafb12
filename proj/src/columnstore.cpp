#include "pdex/columnstore.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <set>

#include "pdex/error.hpp"

namespace pdex {

std::string_view to_string(SegmentEncoding e) {
  switch (e) {
    case SegmentEncoding::raw: return "raw";
    case SegmentEncoding::rle: return "rle";
    case SegmentEncoding::dictionary: return "dictionary";
  }
  return "?";
}

namespace {

constexpr const char* kLocatorColumn = "__locator";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw Error(ErrorCode::bad_file, "truncated column segment");
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

void put_tagged(std::string& out, const Value& v) {
  switch (v.index()) {
    case 0: out.push_back('\0'); return;
    case 1:
      out.push_back('\x01');
      put_u64(out, static_cast<std::uint64_t>(std::get<1>(v)));
      return;
    case 2:
      out.push_back('\x01');
      put_u64(out, std::bit_cast<std::uint64_t>(std::get<2>(v)));
      return;
    default: {
      out.push_back('\x01');
      const auto& s = std::get<3>(v);
      put_u32(out, static_cast<std::uint32_t>(s.size()));
      out += s;
    }
  }
}

Value get_tagged(Reader& r, ColumnType type) {
  if (r.le(1) == 0) return Value{};
  switch (type) {
    case ColumnType::int64: return static_cast<std::int64_t>(r.le(8));
    case ColumnType::float64: return std::bit_cast<double>(r.le(8));
    default: {
      auto len = static_cast<std::size_t>(r.le(4));
      return r.bytes(len);
    }
  }
}

struct ValueLess {
  bool operator()(const Value& a, const Value& b) const { return compare_values(a, b) < 0; }
};

std::size_t run_count(std::span<const Value> values) {
  std::size_t runs = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i == 0 || values[i].index() != values[i - 1].index() || !values_equal(values[i], values[i - 1])) ++runs;
  }
  return runs;
}

}  // namespace

std::string encode_segment(ColumnType type, std::span<const Value> values, SegmentEncoding encoding) {
  (void)type;
  std::string out;
  out.push_back(static_cast<char>(encoding));
  put_u32(out, static_cast<std::uint32_t>(values.size()));
  switch (encoding) {
    case SegmentEncoding::raw:
      for (const auto& v : values) put_tagged(out, v);
      break;
    case SegmentEncoding::rle: {
      std::string body;
      std::uint32_t runs = 0;
      std::size_t i = 0;
      while (i < values.size()) {
        std::size_t j = i + 1;
        while (j < values.size() && values[j].index() == values[i].index() && values_equal(values[j], values[i])) ++j;
        put_tagged(body, values[i]);
        put_u32(body, static_cast<std::uint32_t>(j - i));
        ++runs;
        i = j;
      }
      put_u32(out, runs);
      out += body;
      break;
    }
    case SegmentEncoding::dictionary: {
      std::map<Value, std::uint32_t, ValueLess> codes;
      for (const auto& v : values) codes.emplace(v, 0);
      std::uint32_t next = 0;
      for (auto& [v, code] : codes) code = next++;
      put_u32(out, static_cast<std::uint32_t>(codes.size()));
      for (const auto& [v, code] : codes) put_tagged(out, v);
      int width = codes.size() <= 0x100 ? 1 : (codes.size() <= 0x10000 ? 2 : 4);
      out.push_back(static_cast<char>(width));
      for (const auto& v : values) {
        auto code = codes.at(v);
        for (int b = 0; b < width; ++b) out.push_back(static_cast<char>((code >> (8 * b)) & 0xFF));
      }
      break;
    }
  }
  return out;
}

std::vector<Value> decode_segment(ColumnType type, std::string_view payload) {
  Reader r(payload);
  auto encoding = static_cast<SegmentEncoding>(r.le(1));
  auto count = static_cast<std::size_t>(r.le(4));
  std::vector<Value> values;
  values.reserve(count);
  switch (encoding) {
    case SegmentEncoding::raw:
      for (std::size_t i = 0; i < count; ++i) values.push_back(get_tagged(r, type));
      break;
    case SegmentEncoding::rle: {
      auto runs = r.le(4);
      for (std::uint64_t k = 0; k < runs; ++k) {
        Value v = get_tagged(r, type);
        auto len = r.le(4);
        for (std::uint64_t i = 0; i < len; ++i) values.push_back(v);
      }
      break;
    }
    case SegmentEncoding::dictionary: {
      auto size = static_cast<std::size_t>(r.le(4));
      std::vector<Value> dict;
      dict.reserve(size);
      for (std::size_t i = 0; i < size; ++i) dict.push_back(get_tagged(r, type));
      int width = static_cast<int>(r.le(1));
      for (std::size_t i = 0; i < count; ++i) {
        auto code = static_cast<std::size_t>(r.le(width));
        if (code >= dict.size()) throw Error(ErrorCode::bad_file, "dictionary code out of range");
        values.push_back(dict[code]);
      }
      break;
    }
    default:
      throw Error(ErrorCode::bad_file, "unknown segment encoding");
  }
  if (values.size() != count) throw Error(ErrorCode::bad_file, "segment value count mismatch");
  return values;
}

SegmentEncoding choose_encoding(ColumnType type, std::span<const Value> values) {
  if (values.empty()) return SegmentEncoding::raw;
  const std::size_t runs = run_count(values);
  if (values.size() >= 4 * runs) return SegmentEncoding::rle;
  if (type == ColumnType::string || type == ColumnType::blob) {
    std::set<Value, ValueLess> distinct(values.begin(), values.end());
    if (2 * distinct.size() <= values.size()) return SegmentEncoding::dictionary;
  }
  return SegmentEncoding::raw;
}

bool RowGroupInfo::is_deleted(std::uint32_t ordinal) const {
  return std::binary_search(deleted.begin(), deleted.end(), ordinal);
}

namespace {

Schema stored_schema(const Schema& table) {
  auto cols = table.columns();
  cols.push_back(Column{kLocatorColumn, ColumnType::blob, false});
  return Schema(std::move(cols));
}

}  // namespace

Columnstore::Columnstore(Pager& pager, Schema schema, std::size_t threshold, ColumnstoreState state)
    : pager_(pager),
      schema_(std::move(schema)),
      stored_(stored_schema(schema_)),
      threshold_(threshold == 0 ? kDefaultThreshold : threshold),
      rowgroups_(std::move(state.rowgroups)),
      delta_(pager, std::move(state.delta_pages), std::move(state.delta_spare)) {}

void Columnstore::load() {
  delta_.load();
  positions_.clear();
  delta_count_ = 0;
  const std::size_t loc = stored_.size() - 1;
  for (const auto& rg : rowgroups_) {
    std::size_t cols[] = {loc};
    auto data = read_columns(rg, cols);
    for (std::uint32_t i = 0; i < rg.row_count; ++i) {
      const auto& l = std::get<std::string>(data[0][i]);
      if (!l.empty() && !rg.is_deleted(i)) positions_[l] = Position{rg.id, i, {}};
    }
  }
  delta_.scan([&](Rid rid, std::string_view bytes) {
    Row row = decode_row(stored_, bytes);
    const auto& l = std::get<std::string>(row.back());
    if (!l.empty()) positions_[l] = Position{-1, 0, rid};
    ++delta_count_;
  });
}

std::size_t Columnstore::live_rows() const {
  std::size_t n = delta_count_;
  for (const auto& rg : rowgroups_) n += rg.row_count - rg.deleted.size();
  return n;
}

ColumnstoreState Columnstore::state() const {
  return ColumnstoreState{rowgroups_, delta_.pages(), delta_.spare_pages()};
}

std::size_t Columnstore::append(const Row& row, std::string_view locator) {
  Row full = conform_row(schema_, row);
  full.emplace_back(std::string(locator));
  Rid rid = delta_.insert(encode_row(stored_, full));
  if (!locator.empty()) positions_[std::string(locator)] = Position{-1, 0, rid};
  ++delta_count_;
  if (delta_count_ >= threshold_) return tuple_move();
  return 0;
}

std::size_t Columnstore::append(std::span<const Row> rows) {
  for (const auto& r : rows) conform_row(schema_, r);
  std::size_t created = 0;
  for (const auto& r : rows) created += append(r);
  return created;
}

void Columnstore::write_extent(std::string_view payload, SegmentInfo& info) {
  info.byte_length = static_cast<std::uint32_t>(payload.size());
  info.page_count = static_cast<std::uint32_t>(std::max<std::size_t>(1, (payload.size() + kPageBodySize - 1) / kPageBodySize));
  for (std::uint32_t p = 0; p < info.page_count; ++p) {
    PageId id = pager_.allocate_page(PageKind::columnstore_meta);
    if (p == 0) info.first_page = id.page_number;
    Page page(id, PageKind::columnstore_meta);
    auto chunk = payload.substr(std::min(payload.size(), std::size_t(p) * kPageBodySize), kPageBodySize);
    std::memcpy(page.bytes().data() + kPageHeaderSize, chunk.data(), chunk.size());
    page.put_u16(header::reserved, static_cast<std::uint16_t>(chunk.size()));
    pager_.write_page(page);
  }
}

std::size_t Columnstore::tuple_move() {
  if (delta_count_ < threshold_) return 0;
  std::vector<Row> rows;
  rows.reserve(delta_count_);
  delta_.scan([&](Rid, std::string_view bytes) { rows.push_back(decode_row(stored_, bytes)); });
  const std::size_t groups = rows.size() / threshold_;
  for (std::size_t g = 0; g < groups; ++g) {
    RowGroupInfo rg;
    rg.id = static_cast<std::uint32_t>(rowgroups_.size());
    rg.row_count = static_cast<std::uint32_t>(threshold_);
    const std::size_t base = g * threshold_;
    for (std::size_t c = 0; c < stored_.size(); ++c) {
      std::vector<Value> values;
      values.reserve(threshold_);
      for (std::size_t i = 0; i < threshold_; ++i) values.push_back(rows[base + i][c]);
      SegmentInfo info;
      info.encoding = choose_encoding(stored_[c].type, values);
      bool any = false;
      for (const auto& v : values) {
        if (is_null(v)) {
          ++info.null_count;
          continue;
        }
        if (!any || compare_values(v, info.min) < 0) info.min = v;
        if (!any || compare_values(v, info.max) > 0) info.max = v;
        any = true;
      }
      write_extent(encode_segment(stored_[c].type, values, info.encoding), info);
      rg.segments.push_back(std::move(info));
    }
    for (std::size_t i = 0; i < threshold_; ++i) {
      const auto& l = std::get<std::string>(rows[base + i].back());
      if (!l.empty()) positions_[l] = Position{rg.id, static_cast<std::uint32_t>(i), {}};
    }
    rowgroups_.push_back(std::move(rg));
  }
  delta_.reset();
  delta_count_ = 0;
  for (std::size_t i = groups * threshold_; i < rows.size(); ++i) {
    Rid rid = delta_.insert(encode_row(stored_, rows[i]));
    const auto& l = std::get<std::string>(rows[i].back());
    if (!l.empty()) positions_[l] = Position{-1, 0, rid};
    ++delta_count_;
  }
  return groups;
}

bool Columnstore::erase(std::string_view locator) {
  auto it = positions_.find(std::string(locator));
  if (it == positions_.end()) return false;
  Position pos = it->second;
  positions_.erase(it);
  if (pos.rowgroup < 0) {
    delta_.erase(pos.rid);
    --delta_count_;
    return true;
  }
  auto& del = rowgroups_[static_cast<std::size_t>(pos.rowgroup)].deleted;
  del.insert(std::upper_bound(del.begin(), del.end(), pos.ordinal), pos.ordinal);
  return true;
}

std::vector<std::vector<Value>> Columnstore::read_columns(const RowGroupInfo& rg, std::span<const std::size_t> columns) {
  std::vector<std::vector<Value>> out;
  out.reserve(columns.size());
  for (std::size_t c : columns) {
    const SegmentInfo& seg = rg.segments[c];
    std::string payload;
    payload.reserve(seg.byte_length);
    for (std::uint32_t p = 0; p < seg.page_count; ++p) {
      Page page = pager_.read_page(page_id(seg.first_page + p));
      std::size_t take = std::min<std::size_t>(kPageBodySize, seg.byte_length - payload.size());
      payload.append(reinterpret_cast<const char*>(page.bytes().data()) + kPageHeaderSize, take);
    }
    out.push_back(decode_segment(stored_[c].type, payload));
  }
  return out;
}

bool Columnstore::eliminated(const RowGroupInfo& rg, const Conjunction& predicate) const {
  for (const auto& col : referenced_columns(predicate)) {
    const SegmentInfo& seg = rg.segments[stored_.index_of(col)];
    ColumnRange range = column_range(predicate, col);
    bool has_values = seg.null_count < rg.row_count;
    if (!range.may_overlap(seg.min, seg.max, seg.null_count > 0, has_values)) return true;
  }
  return false;
}

template <typename Visit>
void Columnstore::visit_matches(const std::vector<std::size_t>& needed, const Conjunction& predicate, bool eliminate,
                                CsScanStats& stats, Visit&& visit) {
  // `needed` lists stored-column ordinals; predicate columns must be among them.
  std::vector<std::pair<std::size_t, Atom>> atoms;
  for (const auto& a : predicate) {
    auto c = stored_.index_of(a.column);
    auto at = std::find(needed.begin(), needed.end(), c) - needed.begin();
    atoms.emplace_back(static_cast<std::size_t>(at), a);
  }
  std::uint64_t ordinal_base = 0;
  Row values(needed.size());
  for (const auto& rg : rowgroups_) {
    const std::uint64_t base = ordinal_base;
    ordinal_base += rg.row_count;
    if (eliminate && eliminated(rg, predicate)) {
      stats.segments_skipped += needed.size();
      continue;
    }
    stats.segments_read += needed.size();
    auto data = read_columns(rg, needed);
    for (std::uint32_t i = 0; i < rg.row_count; ++i) {
      if (!rg.deleted.empty() && rg.is_deleted(i)) continue;
      bool ok = true;
      for (const auto& [at, atom] : atoms) {
        if (!eval_atom(atom, data[at][i])) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      for (std::size_t k = 0; k < needed.size(); ++k) values[k] = data[k][i];
      visit(base + i, values);
    }
  }
  std::uint64_t ordinal = ordinal_base;
  delta_.scan([&](Rid, std::string_view bytes) {
    Row row = decode_row(stored_, bytes);
    for (std::size_t k = 0; k < needed.size(); ++k) values[k] = row[needed[k]];
    bool ok = true;
    for (const auto& [at, atom] : atoms) {
      if (!eval_atom(atom, values[at])) {
        ok = false;
        break;
      }
    }
    if (ok) visit(ordinal, values);
    ++ordinal;
  });
}

CsScanResult Columnstore::scan(const std::string& column, const Conjunction& predicate, bool eliminate) {
  Conjunction bound = bind_conjunction(schema_, predicate);
  std::vector<std::size_t> needed{schema_.index_of(column)};
  for (const auto& c : referenced_columns(bound)) {
    auto idx = schema_.index_of(c);
    if (std::find(needed.begin(), needed.end(), idx) == needed.end()) needed.push_back(idx);
  }
  CsScanResult result;
  visit_matches(needed, bound, eliminate, result.stats,
                [&](std::uint64_t ordinal, const Row& values) { result.rows.emplace_back(ordinal, values[0]); });
  return result;
}

Value Columnstore::aggregate(const std::string& column, AggregateFn fn, const Conjunction& predicate, bool eliminate,
                             CsScanStats* stats) {
  Conjunction bound = bind_conjunction(schema_, predicate);
  std::vector<std::size_t> needed;
  std::optional<ColumnType> type;
  if (!column.empty()) {
    auto idx = schema_.index_of(column);
    type = schema_[idx].type;
    needed.push_back(idx);
  }
  if (fn == AggregateFn::sum && (!type || (*type != ColumnType::int64 && *type != ColumnType::float64))) {
    throw Error(ErrorCode::type_mismatch, "SUM needs a numeric column");
  }
  for (const auto& c : referenced_columns(bound)) {
    auto idx = schema_.index_of(c);
    if (std::find(needed.begin(), needed.end(), idx) == needed.end()) needed.push_back(idx);
  }
  CsScanStats local;
  std::int64_t count = 0;
  std::int64_t isum = 0;
  std::vector<double> fvalues;
  bool any = false;
  visit_matches(needed, bound, eliminate, local, [&](std::uint64_t, const Row& values) {
    if (fn == AggregateFn::count) {
      if (column.empty() || !is_null(values[0])) ++count;
      return;
    }
    const Value& v = values[0];
    if (is_null(v)) return;
    any = true;
    if (v.index() == 1) {
      if (__builtin_add_overflow(isum, std::get<1>(v), &isum)) throw Error(ErrorCode::overflow, "SUM overflows int64");
    } else {
      fvalues.push_back(std::get<2>(v));
    }
  });
  if (stats) *stats = local;
  if (fn == AggregateFn::count) return count;
  if (!any) return Value{};
  if (*type == ColumnType::int64) return isum;
  std::sort(fvalues.begin(), fvalues.end());
  double total = 0.0;
  for (double d : fvalues) total += d;
  return total;
}

void Columnstore::for_each_row(const std::function<void(const Row&, std::string_view)>& visit) {
  std::vector<std::size_t> all(stored_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (const auto& rg : rowgroups_) {
    auto data = read_columns(rg, all);
    for (std::uint32_t i = 0; i < rg.row_count; ++i) {
      if (rg.is_deleted(i)) continue;
      Row row(schema_.size());
      for (std::size_t c = 0; c < schema_.size(); ++c) row[c] = data[c][i];
      visit(row, std::get<std::string>(data.back()[i]));
    }
  }
  delta_.scan([&](Rid, std::string_view bytes) {
    Row row = decode_row(stored_, bytes);
    std::string loc = std::get<std::string>(row.back());
    row.pop_back();
    visit(row, loc);
  });
}

}  // namespace pdex
