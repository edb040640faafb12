#include <doctest.h>

#include <algorithm>
#include <map>

#include "pdex/columnstore.hpp"
#include "pdex/error.hpp"
#include "pdex/hash_index.hpp"
#include "test_util.hpp"

using namespace pdex;
using test::int_key;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::usage;
}

// Independent FNV-1a 64.
std::uint64_t fnv(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Atom atom(std::string col, CompareOp op, Value lo, Value hi = {}) { return Atom{std::move(col), op, lo, hi}; }

}  // namespace

TEST_CASE("hash bucket counts") {
  CHECK(HashIndex(65536, false).bucket_count() == 65536);
  CHECK(HashIndex(1000, false).bucket_count() == 1024);
  CHECK(HashIndex(1, false).bucket_count() == 1);
  CHECK(code_of([] { HashIndex(0, false); }) == ErrorCode::invalid_bucket_count);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("hash insert, lookup and erase") {
  HashIndex h(64, true);
  h.insert(int_key(1), "L1");
  CHECK(h.lookup_equal(int_key(1)) == std::vector<std::string>{"L1"});
  CHECK(code_of([&] { h.insert(int_key(1), "L2"); }) == ErrorCode::duplicate_key);
  CHECK(h.size() == 1);

  ProbeStats st;
  CHECK(h.lookup_equal(int_key(2), &st).empty());
  CHECK(st.buckets_probed == 1);

  CHECK(h.erase(int_key(1), "L1"));
  CHECK_FALSE(h.erase(int_key(1), "L1"));
  CHECK(h.lookup_equal(int_key(1)).empty());

  HashIndex multi(64, false);
  multi.insert(int_key(3), "A");
  multi.insert(int_key(3), "B");
  auto locs = multi.lookup_equal(int_key(3));
  std::sort(locs.begin(), locs.end());
  CHECK(locs == std::vector<std::string>{"A", "B"});
}

TEST_CASE("forced collision gives a chain of two") {
  HashIndex h(1024, true);
  auto first = int_key(0);
  std::string second;
  for (std::int64_t i = 1; second.empty(); ++i) {
    if ((fnv(int_key(i)) & 1023) == (fnv(first) & 1023)) second = int_key(i);
  }
  h.insert(first, "one");
  h.insert(second, "two");
  CHECK(h.chain_length(h.bucket_of(first)) == 2);
  CHECK(h.lookup_equal(first) == std::vector<std::string>{"one"});
  CHECK(h.lookup_equal(second) == std::vector<std::string>{"two"});
}

TEST_CASE("probe cost follows chain position") {
  const std::size_t buckets = 4096;
  const std::int64_t n = 100000;
  HashIndex h(buckets, true);
  for (std::int64_t i = 0; i < n; ++i) h.insert(int_key(i), "x");

  // Oracle: entries are prepended, so a key sits behind every later key of its bucket.
  std::vector<std::size_t> later(static_cast<std::size_t>(n), 0);
  std::vector<std::uint64_t> bucket(static_cast<std::size_t>(n));
  std::map<std::uint64_t, std::size_t> sizes;
  for (std::int64_t i = 0; i < n; ++i) {
    bucket[i] = fnv(int_key(i)) & (buckets - 1);
    ++sizes[bucket[i]];
  }
  std::map<std::uint64_t, std::size_t> seen;
  for (std::int64_t i = 0; i < n; ++i) later[i] = sizes[bucket[i]] - ++seen[bucket[i]];

  for (std::int64_t i = 0; i < n; i += 997) {
    ProbeStats st;
    CHECK(h.lookup_equal(int_key(i), &st).size() == 1);
    CHECK(st.buckets_probed == 1);
    CHECK(st.entries_examined == later[i] + 1);
  }

  std::size_t max_chain = 0;
  for (auto& [b, c] : sizes) max_chain = std::max(max_chain, c);
  auto cs = h.chain_stats();
  CHECK(cs.max_chain == max_chain);
  CHECK(cs.empty_buckets == buckets - sizes.size());
  CHECK(cs.avg_chain == doctest::Approx(static_cast<double>(n) / buckets));
}

TEST_CASE("chain stats on empty and one-per-bucket indexes") {
  HashIndex h(128, false);
  auto cs = h.chain_stats();
  CHECK(cs.avg_chain == 0.0);
  CHECK(cs.max_chain == 0);
  CHECK(cs.empty_buckets == 128);
  for (int i = 0; i < 128; ++i) h.insert(int_key(i), "l");
  CHECK(h.chain_stats().avg_chain == 1.0);
}

TEST_CASE("columnstore append and tuple move") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("c.pdex"));
  Schema schema({{"x", ColumnType::int64, true}, {"s", ColumnType::string, true}});

  SUBCASE("ten rows stay in the deltastore") {
    Columnstore cs(pager, schema);
    std::vector<Row> rows;
    for (int i = 0; i < 10; ++i) rows.push_back({Value{std::int64_t{i}}, Value{std::string("r")}});
    CHECK(cs.append(rows) == 0);
    CHECK(cs.delta_rows() == 10);
    CHECK(cs.rowgroups().empty());
    CHECK(cs.tuple_move() == 0);
  }

  SUBCASE("threshold rows and beyond") {
    for (std::size_t n : {4096u, 5000u}) {
      Columnstore cs(pager, schema);
      std::vector<Row> rows;
      for (std::size_t i = 0; i < n; ++i) rows.push_back({Value{static_cast<std::int64_t>(i)}, Value{}});
      cs.append(rows);
      REQUIRE(cs.rowgroups().size() == 1);
      CHECK(cs.rowgroups()[0].row_count == 4096);
      CHECK(cs.delta_rows() == n - 4096);
      CHECK(cs.live_rows() == n);
      CHECK(std::get<std::int64_t>(cs.aggregate("", AggregateFn::count, {})) == static_cast<std::int64_t>(n));
      CHECK(std::get<std::int64_t>(cs.aggregate("s", AggregateFn::count, {})) == 0);
    }
  }
}

TEST_CASE("constant column compresses with rle") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("c.pdex"));
  Columnstore cs(pager, Schema({{"v", ColumnType::int64, false}}));
  std::vector<Row> rows(4096, Row{Value{std::int64_t{7}}});
  cs.append(rows);
  REQUIRE(cs.rowgroups().size() == 1);
  const auto& seg = cs.rowgroups()[0].segments[0];
  CHECK(seg.encoding == SegmentEncoding::rle);
  CHECK(seg.byte_length < 64);
  CHECK(std::get<std::int64_t>(cs.aggregate("v", AggregateFn::sum, {})) == 7 * 4096);
}

TEST_CASE("segment elimination") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("c.pdex"));
  Columnstore cs(pager, Schema({{"x", ColumnType::int64, false}}), 100);
  std::vector<Row> rows;
  for (std::int64_t i = 1; i <= 200; ++i) rows.push_back({Value{i}});
  cs.append(rows);
  REQUIRE(cs.rowgroups().size() == 2);

  auto hit = cs.scan("x", {atom("x", CompareOp::eq, std::int64_t{150})});
  CHECK(hit.stats.segments_skipped == 1);
  REQUIRE(hit.rows.size() == 1);
  CHECK(values_equal(hit.rows[0].second, Value{std::int64_t{150}}));

  auto none = cs.scan("x", {atom("x", CompareOp::gt, std::int64_t{500})});
  CHECK(none.rows.empty());
  CHECK(none.stats.segments_skipped == 2);

  auto all = cs.scan("x", {});
  CHECK(all.rows.size() == 200);
  CHECK(all.stats.segments_skipped == 0);

  auto no_elim = cs.scan("x", {atom("x", CompareOp::eq, std::int64_t{150})}, false);
  CHECK(no_elim.stats.segments_skipped == 0);
  CHECK(no_elim.rows.size() == 1);

  CHECK(std::get<std::int64_t>(cs.aggregate("x", AggregateFn::sum,
                                            {atom("x", CompareOp::between, std::int64_t{1}, std::int64_t{10})})) ==
        55);
}

TEST_CASE("columnstore erase by locator") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("c.pdex"));
  Columnstore cs(pager, Schema({{"x", ColumnType::int64, false}}), 4);
  for (std::int64_t i = 0; i < 6; ++i) cs.append(Row{Value{i}}, "loc" + std::to_string(i));
  CHECK(cs.rowgroups().size() == 1);
  CHECK(cs.erase("loc1"));  // in a rowgroup
  CHECK(cs.erase("loc5"));  // in the deltastore
  CHECK_FALSE(cs.erase("loc5"));
  CHECK(cs.live_rows() == 4);
  std::int64_t total = 0;
  cs.for_each_row([&](const Row& r, std::string_view) { total += std::get<std::int64_t>(r[0]); });
  CHECK(total == 0 + 2 + 3 + 4);
}

TEST_CASE("segment encodings round trip") {
  std::vector<Value> ints = {Value{std::int64_t{1}}, Value{}, Value{std::int64_t{-3}}, Value{std::int64_t{1}}};
  std::vector<Value> strs = {Value{std::string("a")}, Value{std::string("b")}, Value{std::string("a")}, Value{}};
  for (auto enc : {SegmentEncoding::raw, SegmentEncoding::rle, SegmentEncoding::dictionary}) {
    auto back = decode_segment(ColumnType::int64, encode_segment(ColumnType::int64, ints, enc));
    REQUIRE(back.size() == ints.size());
    for (std::size_t i = 0; i < ints.size(); ++i) CHECK(compare_values(back[i], ints[i]) == 0);
    auto sback = decode_segment(ColumnType::string, encode_segment(ColumnType::string, strs, enc));
    REQUIRE(sback.size() == strs.size());
    for (std::size_t i = 0; i < strs.size(); ++i) CHECK(compare_values(sback[i], strs[i]) == 0);
  }
  std::vector<Value> runs(100, Value{std::int64_t{4}});
  CHECK(choose_encoding(ColumnType::int64, runs) == SegmentEncoding::rle);
  std::vector<Value> distinct;
  for (std::int64_t i = 0; i < 100; ++i) distinct.push_back(Value{i});
  CHECK(choose_encoding(ColumnType::int64, distinct) == SegmentEncoding::raw);
}
