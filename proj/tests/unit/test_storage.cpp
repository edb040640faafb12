#include <doctest.h>

#include <filesystem>
#include <set>

#include "pdex/error.hpp"
#include "pdex/heap.hpp"
#include "pdex/pager.hpp"
#include "test_util.hpp"

using namespace pdex;

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

}  // namespace

TEST_CASE("page layout arithmetic") {
  Page p(page_id(1), PageKind::heap);
  CHECK(p.free_space() == 8160);
  std::string rec(100, 'x');
  CHECK(p.slot_insert(rec) == 0);
  // Oracle: body minus record minus its slot entry.
  CHECK(p.free_space() == 8192 - 32 - 100 - 4);
  CHECK(p.record(0) == rec);
  CHECK(p.slot_count() == 1);

  Page q(page_id(2), PageKind::heap);
  CHECK(code_of([&] { q.slot_insert(std::string(8157, 'a')); }) == ErrorCode::record_too_large);
  CHECK(q.slot_insert(std::string(8156, 'a')) == 0);
  CHECK(q.free_space() == 0);
}

TEST_CASE("page full") {
  Page p(page_id(1), PageKind::heap);
  p.slot_insert(std::string(8160 - 4 - 10, 'a'));
  CHECK(p.free_space() == 10);
  CHECK(code_of([&] { p.slot_insert(std::string(100, 'b')); }) == ErrorCode::page_full);
  CHECK(p.slot_count() == 1);
}

TEST_CASE("slot delete, update and compaction keep ordinals") {
  Page p(page_id(1), PageKind::heap);
  for (int i = 0; i < 5; ++i) p.slot_insert(std::string(10, static_cast<char>('a' + i)));
  p.slot_delete(2);
  CHECK_FALSE(p.is_live(2));
  CHECK(p.record(2).empty());
  CHECK(p.slot_update(3, std::string(40, 'z')));
  p.compact();
  CHECK(p.record(0) == std::string(10, 'a'));
  CHECK(p.record(3) == std::string(40, 'z'));
  CHECK(p.record(4) == std::string(10, 'e'));
  CHECK(p.used_bytes() == 10 * 3 + 40 + 5 * 4);
}

TEST_CASE("ordered slot insert and remove") {
  Page p(page_id(1), PageKind::btree_leaf);
  p.slot_insert_at(0, "b");
  p.slot_insert_at(0, "a");
  p.slot_insert_at(2, "c");
  CHECK(p.record(0) == "a");
  CHECK(p.record(1) == "b");
  CHECK(p.record(2) == "c");
  p.slot_remove_at(1);
  CHECK(p.slot_count() == 2);
  CHECK(p.record(1) == "c");
}

TEST_CASE("checksum covers everything but its own field") {
  Page p(page_id(3), PageKind::heap);
  p.slot_insert("hello");
  p.seal();
  CHECK(p.stored_checksum() == p.compute_checksum());
  auto before = p.compute_checksum();
  p.bytes()[100] = std::byte{0x5a};
  CHECK(p.compute_checksum() != before);
}

TEST_CASE("pager allocation, counters and file length") {
  test::TempDir dir;
  auto path = dir.file("a.pdex");
  auto pager = Pager::create(path);
  CHECK(pager.page_count() == 1);  // page 0 is the catalog root
  for (std::uint32_t k = 1; k <= 9; ++k) {
    auto id = pager.allocate_page(PageKind::heap);
    CHECK(id.page_number == k);
    CHECK(id.file_id == 1);
  }
  // Host filesystem is the oracle for the file length.
  CHECK(std::filesystem::file_size(path) == 8192u * 10u);

  auto r0 = pager.counters().logical_reads;
  pager.read_page(page_id(4));
  pager.read_page(page_id(4));
  CHECK(pager.counters().logical_reads == r0 + 2);

  auto page = pager.read_page(page_id(5));
  page.slot_insert("payload");
  pager.write_page(page);
  auto back = pager.read_page(page_id(5));
  CHECK(std::equal(back.bytes().begin(), back.bytes().end(), page.bytes().begin()));

  CHECK(code_of([&] { pager.read_page(page_id(999)); }) == ErrorCode::page_out_of_range);
  CHECK(code_of([&] { pager.read_page(PageId{2, 1}); }) == ErrorCode::page_out_of_range);
}

TEST_CASE("pager detects corruption and bad files") {
  test::TempDir dir;
  auto path = dir.file("b.pdex");
  {
    auto pager = Pager::create(path);
    auto id = pager.allocate_page(PageKind::heap);
    auto page = pager.read_page(id);
    page.slot_insert("abc");
    pager.write_page(page);
  }
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    std::fseek(f, 8192 + 5000, SEEK_SET);
    std::fputc(0x77, f);
    std::fclose(f);
  }
  auto pager = Pager::open(path);
  CHECK(code_of([&] { pager.read_page(page_id(1)); }) == ErrorCode::checksum_mismatch);

  auto junk = dir.file("junk.pdex");
  {
    std::FILE* f = std::fopen(junk.c_str(), "wb");
    std::fputs("not a database", f);
    std::fclose(f);
  }
  CHECK(code_of([&] { Pager::open(junk); }) == ErrorCode::bad_file);
}

TEST_CASE("heap round trip, scan and delete") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("h.pdex"));
  HeapFile heap(pager);
  std::set<std::string> seen;
  heap.scan([&](Rid, std::string_view row) { seen.insert(std::string(row)); });
  CHECK(seen.empty());

  auto a = heap.insert("alpha");
  auto b = heap.insert("beta");
  auto c = heap.insert("a longer row value");
  CHECK(heap.fetch(a) == "alpha");
  heap.scan([&](Rid, std::string_view row) { seen.insert(std::string(row)); });
  CHECK(seen == std::set<std::string>{"alpha", "beta", "a longer row value"});

  heap.erase(b);
  CHECK(code_of([&] { heap.fetch(b); }) == ErrorCode::row_not_found);
  CHECK(code_of([&] { heap.update(b, "x"); }) == ErrorCode::row_not_found);
  CHECK(heap.fetch(c) == "a longer row value");
}

TEST_CASE("heap fills a page and moves on") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("h.pdex"));
  HeapFile heap(pager);
  std::string row(996, 'r');  // 1 flag byte -> 997-byte record, 1001 with its slot
  const std::size_t per_page = 8160 / (1 + row.size() + 4);  // 8
  std::vector<Rid> rids;
  for (std::size_t i = 0; i <= per_page; ++i) rids.push_back(heap.insert(row));
  CHECK(heap.pages().size() == 2);
  CHECK(rids[per_page - 1].page == rids[0].page);
  CHECK(rids[per_page].page != rids[0].page);
  for (auto rid : rids) CHECK(heap.fetch(rid) == row);

  auto r0 = pager.counters().logical_reads;
  std::size_t n = 0;
  heap.scan([&](Rid, std::string_view) { ++n; });
  CHECK(n == rids.size());
  CHECK(pager.counters().logical_reads - r0 == heap.pages().size());
}

TEST_CASE("heap update in place and through a forwarding stub") {
  test::TempDir dir;
  auto pager = Pager::create(dir.file("h.pdex"));
  HeapFile heap(pager);
  auto small = heap.insert(std::string(50, 'a'));
  std::vector<Rid> fill;
  for (int i = 0; i < 7; ++i) fill.push_back(heap.insert(std::string(1100, 'f')));
  REQUIRE(heap.pages().size() == 1);

  heap.update(small, std::string(20, 'b'));
  CHECK(heap.fetch(small) == std::string(20, 'b'));
  CHECK(heap.forwarded_rows() == 0);

  std::string big(3000, 'g');
  heap.update(small, big);
  CHECK(heap.forwarded_rows() == 1);
  auto r0 = pager.counters().logical_reads;
  CHECK(heap.fetch(small) == big);
  CHECK(pager.counters().logical_reads - r0 == 2);

  // The stub-owning rid still shows once in a scan.
  std::size_t hits = 0;
  heap.scan([&](Rid rid, std::string_view row) {
    if (rid == small) {
      ++hits;
      CHECK(row == big);
    }
  });
  CHECK(hits == 1);

  heap.erase(small);
  CHECK(code_of([&] { heap.fetch(small); }) == ErrorCode::row_not_found);
  CHECK(heap.forwarded_rows() == 0);
}

TEST_CASE("heap reload restores state") {
  test::TempDir dir;
  auto path = dir.file("h.pdex");
  std::vector<std::uint32_t> pages;
  Rid rid;
  {
    auto pager = Pager::create(path);
    HeapFile heap(pager);
    rid = heap.insert("persisted");
    pages = heap.pages();
  }
  auto pager = Pager::open(path);
  HeapFile heap(pager, pages);
  heap.load();
  CHECK(heap.fetch(rid) == "persisted");
  CHECK(heap.contains(rid));
}

TEST_CASE("rid encoding") {
  Rid r{page_id(0x01020304), 0x0506};
  auto bytes = encode_rid(r);
  CHECK(bytes.size() == 6);
  CHECK(decode_rid(bytes) == r);
}
