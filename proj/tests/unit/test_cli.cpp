#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pdex/cli.hpp"
#include "pdex/engine.hpp"
#include "test_util.hpp"

using namespace pdex;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

bool has_line(const std::string& text, const std::string& line) {
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (l == line) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("create-db then stats reports no tables") {
  test::TempDir dir;
  auto db = dir.file("t.pdex").string();
  CHECK(cli({"create-db", db}).code == 0);
  auto st = cli({"stats", db});
  CHECK(st.code == 0);
  CHECK(has_line(st.out, "tables=0"));
  CHECK(cli({"create-db", db}).code == 1);
}

TEST_CASE("usage errors") {
  auto unknown = cli({"frobnicate", "x"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("unknown command 'frobnicate'") != std::string::npos);
  CHECK(cli({}).code == 1);
  CHECK(cli({"query"}).code == 1);
  test::TempDir dir;
  auto missing = cli({"stats", dir.file("nope.pdex").string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.rfind("error: ", 0) == 0);
}

TEST_CASE("import, query and explain") {
  test::TempDir dir;
  auto db = dir.file("t.pdex").string();
  REQUIRE(cli({"create-db", db}).code == 0);
  REQUIRE(cli({"create-table", db, "t", "id:int64:notnull", "name:string", "score:float64", "--primary-key", "id"})
              .code == 0);

  auto header_only = dir.file("h.csv");
  write(header_only, "id,name,score\n");
  auto h = cli({"import", db, "t", header_only.string()});
  CHECK(h.code == 0);
  CHECK(h.out == "imported 0 rows\n");

  auto csv = dir.file("t.csv");
  write(csv, "id,name,score\r\n1,\"a,b\",1.5\r\n2,\"say \"\"hi\"\"\",\r\n3,,2\r\n");
  auto imp = cli({"import", db, "t", csv.string()});
  CHECK(imp.code == 0);
  CHECK(imp.out == "imported 3 rows\n");

  auto count = cli({"query", db, "SELECT COUNT(*) FROM t"});
  CHECK(count.code == 0);
  CHECK(count.out == "COUNT(*)\n3\n");

  auto comma = cli({"query", db, "SELECT name, score FROM t WHERE id = 1"});
  CHECK(comma.out == "name\tscore\na,b\t1.5\n");
  auto quoted = cli({"query", db, "SELECT name FROM t WHERE id = 2"});
  CHECK(quoted.out == "name\nsay \"hi\"\n");
  CHECK(cli({"query", db, "SELECT id FROM t WHERE score IS NULL"}).out == "id\n2\n");

  auto e1 = cli({"explain", db, "SELECT name FROM t WHERE id = 1"});
  auto e2 = cli({"explain", db, "SELECT name FROM t WHERE id = 1"});
  CHECK(e1.code == 0);
  CHECK(e1.out == e2.out);
  CHECK(e1.out.rfind("clustered_seek index=pk_t est_reads=1 covering=y chosen=y\n", 0) == 0);
  auto analyzed = cli({"explain", db, "SELECT name FROM t WHERE id = 1", "--analyze"});
  CHECK(analyzed.out.find("actual_reads=1\n") != std::string::npos);

  auto bad_header = dir.file("bad.csv");
  write(bad_header, "id,nm,score\n");
  auto bh = cli({"import", db, "t", bad_header.string()});
  CHECK(bh.code == 1);
  CHECK(bh.out.empty());
  CHECK(bh.err.find("header-mismatch") != std::string::npos);

  auto bad_value = dir.file("bad2.csv");
  write(bad_value, "id,name,score\n9,a,1\n10,b,zz\n");
  auto bv = cli({"import", db, "t", bad_value.string()});
  CHECK(bv.code == 1);
  CHECK(bv.err.find("line 3") != std::string::npos);
  CHECK(cli({"query", db, "SELECT COUNT(*) FROM t"}).out == "COUNT(*)\n3\n");

  CHECK(cli({"query", db, "SELECT * FROM t WHERE id = 'x'"}).code == 1);
  CHECK(cli({"query", db, "SELECT * FROM t WHERE"}).code == 1);
}

TEST_CASE("page dump and bulk import") {
  test::TempDir dir;
  auto db = dir.file("big.pdex").string();
  REQUIRE(cli({"create-db", db}).code == 0);
  REQUIRE(cli({"create-table", db, "t", "id:int64:notnull", "grp:int64", "label:string", "--primary-key", "id"})
              .code == 0);
  REQUIRE(cli({"create-index", db, "ix_grp", "t", "grp", "--nonclustered", "--include", "label"}).code == 0);
  REQUIRE(cli({"create-index", db, "hx_label", "t", "label", "--hash", "--buckets", "1000"}).code == 0);

  std::ostringstream csv;
  csv << "id,grp,label\n";
  for (int i = 0; i < 10000; ++i) csv << i << ',' << i % 37 << ",label-" << (i * 31) % 1000 << '\n';
  auto path = dir.file("rows.csv");
  write(path, csv.str());
  auto imp = cli({"import", db, "t", path.string()});
  CHECK(imp.code == 0);
  CHECK(imp.out == "imported 10000 rows\n");

  std::uint32_t root = 0;
  std::uint32_t depth = 0;
  {
    auto engine = Engine::open(db);
    CHECK(engine.audit().ok());
    root = engine.catalog().find_index("pk_t")->storage.root;
    depth = engine.index_stats("pk_t").depth;
  }
  REQUIRE(depth >= 2);

  auto p0 = cli({"page-dump", db, "0"});
  CHECK(p0.code == 0);
  CHECK(p0.out.find("kind=catalog-root magic=PDEXv1") != std::string::npos);

  auto pr = cli({"page-dump", db, std::to_string(root)});
  CHECK(pr.code == 0);
  CHECK(pr.out.find("kind=btree-internal level=" + std::to_string(depth - 1)) != std::string::npos);

  auto oob = cli({"page-dump", db, "999999"});
  CHECK(oob.code == 1);
  CHECK(oob.err.find("page-out-of-range") != std::string::npos);

  auto st = cli({"stats", db, "t", "--density", "grp", "--selectivity", "grp = 3"});
  CHECK(st.code == 0);
  CHECK(has_line(st.out, "rows=10000"));
  CHECK(has_line(st.out, "density=1/37"));
  CHECK(has_line(st.out, "matched=271"));
  CHECK(has_line(st.out, "index.hx_label.buckets=1024"));
}

TEST_CASE("trace side file") {
  test::TempDir dir;
  auto db = dir.file("tr.pdex").string();
  REQUIRE(cli({"create-db", db}).code == 0);
  REQUIRE(cli({"create-table", db, "t", "k:int64:notnull", "v:int64", "--primary-key", "k"}).code == 0);
  ::setenv("PDEX_TRACE", "1", 1);
  CHECK(cli({"query", db, "INSERT INTO t VALUES (5, 1), (7, 2)"}).code == 0);
  CHECK(cli({"query", db, "UPDATE t SET k = 6 WHERE k = 5"}).code == 0);
  ::unsetenv("PDEX_TRACE");
  auto tr = cli({"trace", db});
  CHECK(tr.code == 0);
  std::istringstream in(tr.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "seq\tkind\ttable\tdetail");
  std::vector<std::string> kinds;
  while (std::getline(in, line)) {
    auto first = line.find('\t');
    auto second = line.find('\t', first + 1);
    kinds.push_back(line.substr(first + 1, second - first - 1));
  }
  std::vector<std::string> row_kinds;
  for (auto& k : kinds) {
    if (k != "PLAN_CHOSEN") row_kinds.push_back(k);
  }
  CHECK(row_kinds == std::vector<std::string>{"INSERT", "INSERT", "DELETE", "INSERT"});
  CHECK(cli({"query", db, "SELECT k FROM t WHERE k = 6"}).out == "k\n6\n");
}
