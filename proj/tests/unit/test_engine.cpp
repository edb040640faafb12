#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "pdex/engine.hpp"
#include "pdex/error.hpp"
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

Schema people() {
  return Schema({{"id", ColumnType::int64, true},
                 {"name", ColumnType::string, true},
                 {"age", ColumnType::int64, true},
                 {"photo", ColumnType::blob, true}});
}

IndexDef nc(std::string name, std::vector<std::string> keys, bool unique = false) {
  IndexDef d;
  d.name = std::move(name);
  d.table = "p";
  d.key_columns = std::move(keys);
  d.unique = unique;
  return d;
}

Row person(std::int64_t id, std::string name, std::int64_t age) {
  return {Value{id}, Value{std::move(name)}, Value{age}, Value{}};
}

std::vector<std::string> kinds(const std::vector<TraceEvent>& events) {
  std::vector<std::string> out;
  for (const auto& e : events) out.emplace_back(to_string(e.kind));
  return out;
}

std::size_t count_kind(const std::vector<TraceEvent>& events, TraceKind k) {
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](auto& e) { return e.kind == k; }));
}

std::vector<Row> sorted_rows(Engine& db, const std::string& table) {
  auto rows = db.rows(table);
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      int c = compare_values(a[i], b[i]);
      if (c != 0) return c < 0;
    }
    return false;
  });
  return rows;
}

bool same_rows(const std::vector<Row>& a, const std::vector<Row>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t c = 0; c < a[i].size(); ++c) {
      if (compare_values(a[i][c], b[i][c]) != 0) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("primary key creates a unique clustered index") {
  test::TempDir dir;
  auto db = Engine::create(dir.file("e.pdex"));
  db.create_table({"p", people(), {"id"}});
  const auto* pk = db.catalog().find_index("pk_p");
  REQUIRE(pk != nullptr);
  CHECK(pk->def.kind == IndexKind::clustered);
  CHECK(pk->def.unique);
  CHECK(pk->def.key_columns == std::vector<std::string>{"id"});
  CHECK(db.catalog().organization("p") == Organization::clustered);
  CHECK_FALSE(db.catalog().find_table("p")->def.schema[0].nullable);
  CHECK(code_of([&] { db.insert("p", Row{Value{}, Value{}, Value{}, Value{}}); }) == ErrorCode::schema_mismatch);
}

TEST_CASE("late primary key becomes nonclustered when a clustered index exists") {
  test::TempDir dir;
  auto db = Engine::create(dir.file("e.pdex"));
  db.create_table({"p", people(), {}});
  IndexDef cl = nc("cx_age", {"age"});
  cl.kind = IndexKind::clustered;
  db.create_index(cl);
  db.declare_primary_key("p", {"id"});
  const auto* pk = db.catalog().find_index("pk_p");
  REQUIRE(pk != nullptr);
  CHECK(pk->def.kind == IndexKind::nonclustered);
  CHECK(pk->def.unique);
}

TEST_CASE("DDL rules") {
  test::TempDir dir;
  auto db = Engine::create(dir.file("e.pdex"));
  db.create_table({"p", people(), {"id"}});
  CHECK(code_of([&] { db.create_table({"p", people(), {}}); }) == ErrorCode::duplicate_name);

  IndexDef cl = nc("cx2", {"name"});
  cl.kind = IndexKind::clustered;
  CHECK(code_of([&] { db.create_index(cl); }) == ErrorCode::second_clustered_index);
  CHECK(code_of([&] { db.create_index(nc("ix_photo", {"photo"})); }) == ErrorCode::blob_key_column);
  CHECK(code_of([&] { db.create_index(nc("pk_p", {"name"})); }) == ErrorCode::duplicate_name);
  CHECK(code_of([&] { db.create_index(nc("ix_none", {"nope"})); }) == ErrorCode::not_found);

  IndexDef bad_ff = nc("ix_ff", {"name"});
  bad_ff.fill_factor = 0.3;
  CHECK(code_of([&] { db.create_index(bad_ff); }) == ErrorCode::invalid_index_def);

  db.create_index(nc("ix_name", {"name"}));
  db.drop_index("ix_name");
  CHECK(db.catalog().find_index("ix_name") == nullptr);
  CHECK(code_of([&] { db.drop_index("ix_name"); }) == ErrorCode::not_found);
}

TEST_CASE("unique build over duplicates leaves nothing behind") {
  test::TempDir dir;
  auto db = Engine::create(dir.file("e.pdex"));
  db.create_table({"p", people(), {}});
  db.insert("p", std::vector<Row>{person(1, "a", 30), person(2, "b", 30)});
  CHECK(code_of([&] { db.create_index(nc("ux_age", {"age"}, true)); }) == ErrorCode::duplicate_key);
  CHECK(db.catalog().find_index("ux_age") == nullptr);
  CHECK(db.audit().ok());
  db.create_index(nc("ux_id", {"id"}, true));
  CHECK(db.index_stats("ux_id").density == std::optional<Ratio>(Ratio{1, 2}));
}

TEST_CASE("statements are atomic on unique violations") {
  test::TempDir dir;
  auto db = Engine::create(dir.file("e.pdex"));
  db.create_table({"p", people(), {"id"}});
  db.create_index(nc("ux_name", {"name"}, true));
  db.insert("p", std::vector<Row>{person(1, "a", 1), person(2, "b", 2), person(3, "c", 3)});
  auto before = sorted_rows(db, "p");

  CHECK(code_of([&] { db.insert("p", std::vector<Row>{person(4, "d", 4), person(5, "a", 5)}); }) ==
        ErrorCode::duplicate_key);
  CHECK(code_of([&] { db.insert("p", std::vector<Row>{person(6, "e", 4), person(6, "f", 5)}); }) ==
        ErrorCode::duplicate_key);
  CHECK(code_of([&] {
          db.update("p", parse_conjunction("id > 1"), {Assignment{"name", Value{std::string("z")}}});
        }) == ErrorCode::duplicate_key);
  CHECK(code_of([&] { db.update("p", parse_conjunction("id = 1"), {Assignment{"id", Value{std::int64_t{2}}}}); }) ==
        ErrorCode::duplicate_key);
  CHECK(same_rows(sorted_rows(db, "p"), before));
  CHECK(db.audit().ok());
}

TEST_CASE("clustered key change is a delete then an insert") {
  test::TempDir dir;
  auto db = Engine::create(dir.file("e.pdex"));
  db.create_table({"p", people(), {"id"}});
  for (std::int64_t i = 1; i <= 10; ++i) db.insert("p", person(i * 5, "n" + std::to_string(i), i));
  db.clear_trace();
  CHECK(db.update("p", parse_conjunction("id = 5"), {Assignment{"id", Value{std::int64_t{6}}}}) == 1);
  auto row_events = db.trace();
  row_events.erase(std::remove_if(row_events.begin(), row_events.end(),
                                  [](auto& e) { return e.kind == TraceKind::plan_chosen; }),
                   row_events.end());
  CHECK(kinds(row_events) == std::vector<std::string>{"DELETE", "INSERT"});
  CHECK(db.table_info("p").rows == 10);
  CHECK(db.execute(parse_query("SELECT * FROM p WHERE id = 5")).rows.empty());
  CHECK(db.execute(parse_query("SELECT * FROM p WHERE id = 6")).rows.size() == 1);
  for (std::size_t i = 1; i < db.trace().size(); ++i) CHECK(db.trace()[i].seq > db.trace()[i - 1].seq);
}

TEST_CASE("index maintenance events") {
  test::TempDir dir;
  auto db = Engine::create(dir.file("e.pdex"));
  db.create_table({"p", people(), {"id"}});
  db.create_index(nc("ix_a1", {"age"}));
  db.create_index(nc("ix_a2", {"age", "name"}));
  IndexDef inc = nc("ix_a3", {"name"});
  inc.included_columns = {"age"};
  db.create_index(inc);
  db.insert("p", std::vector<Row>{person(1, "a", 10), person(2, "b", 20)});

  db.clear_trace();
  db.update("p", parse_conjunction("id = 1"), {Assignment{"photo", Value{std::string("\x01\x02")}}});
  CHECK(count_kind(db.trace(), TraceKind::update_in_place) == 1);
  CHECK(count_kind(db.trace(), TraceKind::index_maintain) == 0);

  db.clear_trace();
  db.update("p", parse_conjunction("id = 2"), {Assignment{"age", Value{std::int64_t{21}}}});
  CHECK(count_kind(db.trace(), TraceKind::index_maintain) == 3);
  CHECK(db.audit().ok());

  db.clear_trace();
  CHECK(db.erase("p", parse_conjunction("age > 100")) == 0);
  CHECK_FALSE(db.trace().empty());
}

TEST_CASE("queries, empty tables and COUNT") {
  test::TempDir dir;
  auto db = Engine::create(dir.file("e.pdex"));
  db.create_table({"p", people(), {}});
  auto empty = db.execute(parse_query("SELECT * FROM p"));
  CHECK(empty.rows.empty());
  CHECK(empty.explain.candidates.size() == 1);
  auto zero = db.execute(parse_query("SELECT COUNT(*) FROM p"));
  REQUIRE(zero.rows.size() == 1);
  CHECK(std::get<std::int64_t>(zero.rows[0][0]) == 0);

  std::vector<Row> rows;
  for (std::int64_t i = 0; i < 123; ++i) rows.push_back(person(i, "x", i % 5));
  db.insert("p", rows);
  auto n = db.execute(parse_query("SELECT COUNT(*) FROM p"));
  CHECK(std::get<std::int64_t>(n.rows[0][0]) == 123);
  auto s = db.execute(parse_query("SELECT SUM(age) FROM p WHERE age > 2"));
  std::int64_t expected = 0;
  for (std::int64_t i = 0; i < 123; ++i) expected += i % 5 > 2 ? i % 5 : 0;
  CHECK(std::get<std::int64_t>(s.rows[0][0]) == expected);
  CHECK(code_of([&] { db.execute(parse_query("SELECT * FROM p WHERE age = 'x'")); }) == ErrorCode::type_mismatch);
}

TEST_CASE("trace replay rebuilds the same contents") {
  test::TempDir dir;
  auto db = Engine::create(dir.file("src.pdex"), EngineOptions{.trace_file = true});
  db.create_table({"p", people(), {"id"}});
  db.create_index(nc("ix_age", {"age"}));
  for (std::int64_t i = 0; i < 50; ++i) db.insert("p", person(i, "n" + std::to_string(i), i % 7));
  db.update("p", parse_conjunction("age = 3"), {Assignment{"name", Value{std::string("three")}}});
  db.update("p", parse_conjunction("id = 10"), {Assignment{"id", Value{std::int64_t{-1}}}});
  db.erase("p", parse_conjunction("age = 5"));
  db.flush();

  auto copy = Engine::create(dir.file("dst.pdex"));
  copy.create_table({"p", people(), {"id"}});
  copy.create_index(nc("ix_age", {"age"}));
  std::ifstream in(dir.file("src.pdex.trace"));
  REQUIRE(in.good());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    auto ev = parse_trace_line(line);
    CHECK(format_trace_line(ev) == line);
    copy.replay(ev);
    ++lines;
  }
  CHECK(lines == db.trace().size());
  CHECK(same_rows(sorted_rows(copy, "p"), sorted_rows(db, "p")));
  CHECK(copy.audit().ok());
}

TEST_CASE("state survives reopen") {
  test::TempDir dir;
  auto path = dir.file("e.pdex");
  std::vector<Row> before;
  {
    auto db = Engine::create(path);
    db.create_table({"p", people(), {"id"}});
    IndexDef h = nc("hx_name", {"name"});
    h.kind = IndexKind::hash;
    h.buckets = 100;
    db.create_index(h);
    IndexDef cs = nc("cs_p", {"age"});
    cs.kind = IndexKind::columnstore;
    cs.key_columns = {"id", "age"};
    db.create_index(cs);
    for (std::int64_t i = 0; i < 300; ++i) db.insert("p", person(i, "n" + std::to_string(i % 13), i));
    before = sorted_rows(db, "p");
    db.flush();
  }
  auto db = Engine::open(path);
  CHECK(same_rows(sorted_rows(db, "p"), before));
  CHECK(db.hash_index("hx_name").bucket_count() == 128);
  CHECK(db.hash_index("hx_name").size() == 300);
  CHECK(db.columnstore("cs_p").live_rows() == 300);
  CHECK(db.audit().ok());
  auto q = parse_query("SELECT id FROM p WHERE name = 'n4'");
  auto plans = db.enumerate(q);
  auto it = std::find_if(plans.begin(), plans.end(), [](auto& p) { return p.kind == PlanKind::hash_probe; });
  REQUIRE(it != plans.end());
  CHECK(db.execute_plan(q, *it).rows.size() == 23);
}
