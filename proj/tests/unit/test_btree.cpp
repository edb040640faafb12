#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "pdex/btree.hpp"
#include "pdex/error.hpp"
#include "pdex/key_encoding.hpp"
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

// 200-byte keys that differ only in the last four bytes, so separators cannot be shortened much.
std::string wide_key(std::uint32_t i) {
  std::string k(196, 'k');
  for (int b = 3; b >= 0; --b) k.push_back(static_cast<char>((i >> (8 * b)) & 0xFF));
  return k;
}

std::string leaf_record(std::string_view key, std::string_view value) {
  std::string r;
  r.push_back(static_cast<char>(key.size() & 0xFF));
  r.push_back(static_cast<char>(key.size() >> 8));
  r.append(key);
  r.append(value);
  return r;
}

std::string internal_record(std::string_view key, std::uint32_t child) {
  std::string r = leaf_record(key, "");
  for (int b = 0; b < 4; ++b) r.push_back(static_cast<char>((child >> (8 * b)) & 0xFF));
  return r;
}

}  // namespace

TEST_CASE("key encoding preserves tuple order") {
  std::mt19937_64 rng(7);
  std::vector<Value> samples = {Value{}, Value{std::int64_t{-5}}, Value{std::int64_t{0}},
                                Value{std::int64_t{1} << 40}, Value{std::int64_t{-1}},
                                Value{std::numeric_limits<std::int64_t>::min()},
                                Value{std::numeric_limits<std::int64_t>::max()}};
  for (int i = 0; i < 200; ++i) samples.push_back(Value{static_cast<std::int64_t>(rng())});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = 0; j < samples.size(); ++j) {
      auto a = encode_key(std::span<const Value>(&samples[i], 1));
      auto b = encode_key(std::span<const Value>(&samples[j], 1));
      int c = compare_values(samples[i], samples[j]);
      CHECK((a < b) == (c < 0));
      CHECK((a == b) == (c == 0));
    }
  }

  std::vector<std::string> strs = {"", "a", "ab", std::string("a\0b", 3), std::string("a\0", 2), "b", "\xff"};
  for (auto& x : strs) {
    for (auto& y : strs) {
      Row rx{Value{x}, Value{std::int64_t{1}}};
      Row ry{Value{y}, Value{std::int64_t{0}}};
      auto ex = encode_key(rx);
      auto ey = encode_key(ry);
      // Equal first columns fall through to 1 > 0.
      CHECK((ex < ey) == (x < y));
    }
  }

  std::vector<double> ds = {-1e300, -2.5, -0.0, 0.0, 1e-300, 3.25, 1e300};
  for (std::size_t i = 0; i + 1 < ds.size(); ++i) {
    Value a{ds[i]}, b{ds[i + 1]};
    auto ea = encode_key(std::span<const Value>(&a, 1));
    auto eb = encode_key(std::span<const Value>(&b, 1));
    if (ds[i] == ds[i + 1]) {
      CHECK(ea == eb);
    } else {
      CHECK(ea < eb);
    }
  }
}

TEST_CASE("key encoding round trip and prefix successor") {
  std::vector<ColumnType> types = {ColumnType::int64, ColumnType::string, ColumnType::float64};
  Row row{Value{std::int64_t{-42}}, Value{std::string("x\0y", 3)}, Value{2.5}};
  auto enc = encode_key(row);
  std::size_t used = 0;
  auto back = decode_key(types, enc, &used);
  CHECK(used == enc.size());
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(values_equal(back[i], row[i]));

  CHECK(prefix_successor("ab") == std::optional<std::string>("ac"));
  CHECK(prefix_successor("a\xff") == std::optional<std::string>("b"));
  CHECK_FALSE(prefix_successor("").has_value());
  CHECK_FALSE(prefix_successor("\xff\xff").has_value());
}

TEST_CASE("empty tree") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("t.pdex"));
  auto empty = BTree::bulk_build(pager, true, 1.0, {});
  CHECK(empty.depth() == 1);
  CHECK(empty.shape().leaf_pages == 1);
  CHECK(empty.validate().ok());

  auto tree = BTree::create(pager, false);
  CHECK(tree.depth() == 1);
  tree.insert(int_key(5), "v");
  CHECK(tree.depth() == 1);
  CHECK(tree.find(int_key(5)) == std::optional<std::string>("v"));
}

TEST_CASE("bulk build depth and leaf count follow the capacity formula") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("t.pdex"));
  const std::uint32_t n = 5000;
  std::vector<BTreeEntry> entries;
  for (std::uint32_t i = 0; i < n; ++i) entries.push_back({wide_key(i), ""});

  // Oracle from the layout constants alone.
  const std::size_t body = 8192 - 32;
  const std::size_t per_leaf = body / (2 + 200 + 4);
  const std::size_t fanout = body / (2 + 200 + 4 + 4);
  std::uint64_t leaves = (n + per_leaf - 1) / per_leaf;
  std::uint32_t depth = 1;
  for (std::uint64_t level = leaves; level > 1; level = (level + fanout - 1) / fanout) ++depth;

  auto full = BTree::bulk_build(pager, true, 1.0, entries);
  auto shape = full.shape();
  CHECK(shape.leaf_pages == leaves);
  CHECK(full.depth() == depth);
  CHECK(depth == 3);
  CHECK(shape.entries == n);
  CHECK(full.validate().ok());


  SUBCASE("point seek reads depth pages") {
    auto r0 = pager.counters().logical_reads;
    CHECK(full.find(wide_key(1234)).has_value());
    CHECK(pager.counters().logical_reads - r0 == 3);
    r0 = pager.counters().logical_reads;
    CHECK_FALSE(full.find(wide_key(n + 10)).has_value());
    CHECK(pager.counters().logical_reads - r0 == 3);
    // First key of a leaf.
    r0 = pager.counters().logical_reads;
    CHECK(full.find(wide_key(per_leaf * 7)).has_value());
    CHECK(pager.counters().logical_reads - r0 == 3);
  }

  SUBCASE("range over five leaves reads depth + 4") {
    auto lo = wide_key(static_cast<std::uint32_t>(per_leaf * 10));
    auto hi = wide_key(static_cast<std::uint32_t>(per_leaf * 15 - 1));
    std::size_t seen = 0;
    auto r0 = pager.counters().logical_reads;
    full.scan(lo, hi, [&](std::string_view, std::string_view) {
      ++seen;
      return true;
    });
    CHECK(seen == per_leaf * 5 - 1);
    CHECK(pager.counters().logical_reads - r0 == 3 + 4);
  }

  CHECK(code_of([&] {
          std::vector<BTreeEntry> bad = {{"a", ""}, {"a", ""}};
          BTree::bulk_build(pager, true, 1.0, bad);
        }) == ErrorCode::duplicate_key);
}

TEST_CASE("half fill factor doubles the leaf count") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("t.pdex"));
  std::vector<BTreeEntry> entries;
  for (std::int64_t i = 0; i < 100000; ++i) entries.push_back({int_key(i), "locatr"});
  auto full = BTree::bulk_build(pager, true, 1.0, entries);
  auto half = BTree::bulk_build(pager, true, 0.5, entries);
  const std::size_t rec = 2 + 9 + 6 + 4;
  const std::uint64_t full_leaves = (100000 + 8160 / rec - 1) / (8160 / rec);
  CHECK(full.shape().leaf_pages == full_leaves);
  auto diff = static_cast<long long>(half.shape().leaf_pages) - 2 * static_cast<long long>(full_leaves);
  CHECK(std::llabs(diff) <= 1);
  CHECK(half.validate().ok());
  CHECK(full.depth() == 2);
}

TEST_CASE("inserts split leaves and grow the root") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("t.pdex"));
  auto tree = BTree::create(pager, true);
  auto root = tree.root();
  for (std::int64_t i = 0; i < 1000; ++i) tree.insert(int_key(i), "locatr");
  // 17-byte records: at most 8160 / 21 = 388 per leaf.
  CHECK(tree.shape().leaf_pages >= 3);
  CHECK(tree.depth() == 2);
  CHECK(tree.root() == root);
  CHECK(tree.validate().ok());

  std::vector<std::string> keys;
  tree.scan(std::nullopt, std::nullopt, [&](std::string_view k, std::string_view) {
    keys.emplace_back(k);
    return true;
  });
  CHECK(keys.size() == 1000);
  CHECK(std::is_sorted(keys.begin(), keys.end()));

  std::size_t in_range = 0;
  tree.scan(int_key(10), int_key(21), [&](std::string_view, std::string_view) {
    ++in_range;
    return true;
  });
  CHECK(in_range == 11);
}

TEST_CASE("unique violations, deletes and replace") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("t.pdex"));
  auto tree = BTree::create(pager, true);
  tree.insert(int_key(1), "a");
  CHECK(code_of([&] { tree.insert(int_key(1), "b"); }) == ErrorCode::duplicate_key);
  CHECK(tree.shape().entries == 1);
  CHECK(tree.validate().ok());

  tree.replace(int_key(1), "c");
  CHECK(tree.find(int_key(1)) == std::optional<std::string>("c"));

  tree.erase(int_key(1));
  CHECK(tree.depth() == 1);
  CHECK(tree.shape().entries == 0);
  CHECK(code_of([&] { tree.erase(int_key(1)); }) == ErrorCode::entry_not_found);

  CHECK(code_of([&] { tree.insert(std::string(BTree::kMaxKeySize + 1, 'k'), ""); }) == ErrorCode::entry_too_large);
}

TEST_CASE("non-unique duplicates are told apart by locator") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("t.pdex"));
  auto tree = BTree::create(pager, false);
  auto user = int_key(9);
  tree.insert(user + "LOC001", "");
  tree.insert(user + "LOC002", "");
  tree.erase(user + "LOC001");
  std::vector<std::string> found;
  tree.scan_prefix(user, [&](std::string_view k, std::string_view) {
    found.emplace_back(k);
    return true;
  });
  REQUIRE(found.size() == 1);
  CHECK(found[0] == user + "LOC002");
}

TEST_CASE("deletes never merge pages") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("t.pdex"));
  auto tree = BTree::create(pager, true);
  for (std::int64_t i = 0; i < 2000; ++i) tree.insert(int_key(i), "v");
  auto before = tree.shape();
  for (std::int64_t i = 0; i < 2000; ++i) tree.erase(int_key(i));
  auto after = tree.shape();
  CHECK(after.entries == 0);
  CHECK(after.depth == before.depth);
  CHECK(after.leaf_pages == before.leaf_pages);
  CHECK(tree.validate().ok());
}

TEST_CASE("random operations agree with an ordered map") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("t.pdex"));
  auto tree = BTree::create(pager, true);
  std::map<std::string, std::string> model;
  std::mt19937 rng(12345);
  std::uniform_int_distribution<int> key_dist(0, 3000);
  std::uniform_int_distribution<int> len_dist(0, 60);
  for (int op = 0; op < 10000; ++op) {
    auto key = int_key(key_dist(rng)) + std::string(static_cast<std::size_t>(len_dist(rng)), 'p');
    if (rng() % 3 == 0 && !model.empty()) {
      auto it = model.lower_bound(key);
      if (it == model.end()) it = model.begin();
      tree.erase(it->first);
      model.erase(it);
    } else if (model.count(key)) {
      CHECK(code_of([&] { tree.insert(key, "dup"); }) == ErrorCode::duplicate_key);
    } else {
      auto value = std::to_string(op);
      tree.insert(key, value);
      model[key] = value;
    }
  }
  CHECK(tree.validate().ok());
  std::vector<std::pair<std::string, std::string>> got;
  tree.scan(std::nullopt, std::nullopt, [&](std::string_view k, std::string_view v) {
    got.emplace_back(k, v);
    return true;
  });
  CHECK(got == std::vector<std::pair<std::string, std::string>>(model.begin(), model.end()));
}

TEST_CASE("validate reports hand-built violations") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("t.pdex"));

  SUBCASE("swapped entries") {
    auto id = pager.allocate_page(PageKind::btree_leaf);
    Page leaf = pager.read_page(id);
    leaf.slot_insert(leaf_record("b", "1"));
    leaf.slot_insert(leaf_record("a", "2"));
    pager.write_page(leaf);
    CHECK(BTree(pager, id, true).validate().violation == Violation::ordering);
  }

  SUBCASE("leaves at different levels") {
    auto root_id = pager.allocate_page(PageKind::btree_internal, 2);
    auto mid_id = pager.allocate_page(PageKind::btree_internal, 1);
    auto leaf_a = pager.allocate_page(PageKind::btree_leaf);
    auto leaf_b = pager.allocate_page(PageKind::btree_leaf);

    Page a = pager.read_page(leaf_a);
    a.slot_insert(leaf_record("a", ""));
    a.set_right_sibling(leaf_b);
    pager.write_page(a);
    Page b = pager.read_page(leaf_b);
    b.slot_insert(leaf_record("m", ""));
    pager.write_page(b);
    Page mid = pager.read_page(mid_id);
    mid.slot_insert(internal_record("", leaf_a.page_number));
    pager.write_page(mid);
    Page root = pager.read_page(root_id);
    root.slot_insert(internal_record("", mid_id.page_number));
    root.slot_insert(internal_record("m", leaf_b.page_number));
    pager.write_page(root);

    CHECK(BTree(pager, root_id, true).validate().violation == Violation::balance);
  }
}
