#include "pdex/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "pdex/advisor.hpp"
#include "pdex/csv.hpp"
#include "pdex/engine.hpp"
#include "pdex/error.hpp"
#include "pdex/key_encoding.hpp"

namespace pdex {

namespace {

// Exclusive advisory lock on <db>.lock for the lifetime of one command.
class DbLock {
 public:
  explicit DbLock(const std::string& db) {
    const std::string path = db + ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::bad_file, "cannot open lock file " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::locked, "database '" + db + "' is in use by another process");
    }
  }
  ~DbLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DbLock(const DbLock&) = delete;
  DbLock& operator=(const DbLock&) = delete;

 private:
  int fd_ = -1;
};

EngineOptions engine_options() {
  EngineOptions o;
  const char* t = std::getenv("PDEX_TRACE");
  o.trace_file = t && std::string_view(t) == "1";
  o.keep_trace = false;
  return o;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Column parse_column_def(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() < 2 || parts.size() > 3 || parts[0].empty()) {
    throw Error(ErrorCode::usage, "column definition '" + text + "' is not name:type[:notnull]");
  }
  std::string type = parts[1];
  if (type == "int") type = "int64";
  if (type == "float") type = "float64";
  if (type == "text") type = "string";
  auto t = parse_column_type(type);
  if (!t) throw Error(ErrorCode::usage, "unknown column type '" + parts[1] + "'");
  bool nullable = true;
  if (parts.size() == 3) {
    if (parts[2] != "notnull") throw Error(ErrorCode::usage, "unknown column flag '" + parts[2] + "'");
    nullable = false;
  }
  return Column{parts[0], *t, nullable};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_result(const QueryResult& r, std::ostream& out) {
  for (std::size_t i = 0; i < r.columns.size(); ++i) out << (i ? "\t" : "") << r.columns[i];
  out << '\n';
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "\t" : "") << display_value(row[i]);
    out << '\n';
  }
}

std::string hex_prefix(std::string_view bytes, std::size_t max = 24) {
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (std::size_t i = 0; i < bytes.size() && i < max; ++i) out << std::setw(2) << (static_cast<unsigned>(bytes[i]) & 0xFF);
  if (bytes.size() > max) out << "..";
  return out.str();
}

void page_dump(const std::string& db, std::uint32_t number, std::ostream& out) {
  Pager pager = Pager::open(db);
  Page p = pager.read_page(page_id(number));
  if (number == 0) {
    std::string magic(reinterpret_cast<const char*>(p.bytes().data()), 6);
    auto sib = p.right_sibling();
    out << "page=0 file=" << kDataFileId << " kind=catalog-root magic=" << magic << " version=" << p.u16(8)
        << " catalog_bytes=" << p.u32(header::reserved + 4) << " chunk_bytes=" << p.u32(header::reserved)
        << " next=" << (sib ? std::to_string(sib->page_number) : "-") << '\n';
    return;
  }
  auto sib = p.right_sibling();
  out << "page=" << p.id().page_number << " file=" << p.id().file_id << " kind=" << to_string(p.kind())
      << " level=" << static_cast<int>(p.level()) << " slots=" << p.slot_count() << " free_space=" << p.free_space()
      << " right_sibling=" << (sib ? std::to_string(sib->page_number) : "-") << '\n';
  if (p.kind() == PageKind::columnstore_meta || p.kind() == PageKind::catalog) {
    out << "chunk_bytes=" << (p.kind() == PageKind::catalog ? p.u32(header::reserved) : p.u16(header::reserved)) << '\n';
    return;
  }
  for (std::uint16_t s = 0; s < p.slot_count(); ++s) {
    out << "slot=" << s;
    if (!p.is_live(s)) {
      out << " dead\n";
      continue;
    }
    std::string_view rec = p.record(s);
    out << " len=" << rec.size();
    if (p.kind() == PageKind::btree_leaf || p.kind() == PageKind::btree_internal) {
      std::size_t klen = static_cast<unsigned char>(rec[0]) | (static_cast<std::size_t>(static_cast<unsigned char>(rec[1])) << 8);
      std::string_view key = rec.substr(2, klen);
      out << " key=" << (key.empty() ? "-" : hex_prefix(key));
      if (p.kind() == PageKind::btree_internal) {
        std::string_view c = rec.substr(2 + klen, 4);
        std::uint32_t child = 0;
        for (int i = 3; i >= 0; --i) child = (child << 8) | static_cast<unsigned char>(c[static_cast<std::size_t>(i)]);
        out << " child=" << child;
      }
    } else if (p.kind() == PageKind::heap) {
      static const char* flags[] = {"row", "stub", "relocated", "row"};
      auto f = static_cast<unsigned char>(rec[0]);
      out << " record=" << (f < 4 ? flags[f] : "?");
    }
    out << '\n';
  }
}

std::string fmt_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

void print_stats(Engine& db, const std::string& table, const std::string& index, const std::string& density_cols,
                 const std::string& selectivity_pred, std::ostream& out) {
  const Catalog& cat = db.catalog();
  if (table.empty()) {
    out << "tables=" << cat.tables.size() << '\n';
    out << "indexes=" << cat.indexes.size() << '\n';
    out << "pages=" << db.pager().page_count() << '\n';
    for (const auto& t : cat.tables) out << "table." << t.def.name << ".rows=" << db.table_info(t.def.name).rows << '\n';
    return;
  }
  const TableInfo info = db.table_info(table);
  out << "table=" << table << '\n';
  out << "organization=" << (info.organization == Organization::heap ? "heap" : "clustered") << '\n';
  out << "rows=" << info.rows << '\n';
  out << "heap_pages=" << info.heap_pages << '\n';
  out << "data_pages=" << info.data_pages << '\n';
  out << "forwarded_rows=" << info.forwarded_rows << '\n';
  if (!density_cols.empty()) {
    Ratio d = db.density(table, split_list(density_cols));
    out << "density=" << to_string(d) << '\n' << "density_value=" << fmt_double(d.value()) << '\n';
  }
  if (!selectivity_pred.empty()) {
    auto rep = db.selectivity(table, parse_conjunction(selectivity_pred));
    out << "matched=" << rep.matched << '\n' << "total=" << rep.total << '\n';
    out << "selectivity=" << to_string(rep.fraction()) << '\n'
        << "selectivity_value=" << fmt_double(rep.fraction().value()) << '\n';
  }
  for (const auto* e : cat.indexes_of(table)) {
    if (!index.empty() && e->def.name != index) continue;
    const std::string p = "index." + e->def.name + ".";
    IndexStats s = db.index_stats(e->def.name);
    out << p << "kind=" << to_string(e->def.kind) << '\n';
    out << p << "unique=" << (e->def.unique ? "y" : "n") << '\n';
    out << p << "depth=" << s.depth << '\n';
    out << p << "leaf_pages=" << s.leaf_pages << '\n';
    out << p << "rows=" << s.row_count << '\n';
    out << p << "density=" << (s.density ? to_string(*s.density) : "-") << '\n';
    if (e->def.kind == IndexKind::hash) {
      const auto& h = db.hash_index(e->def.name);
      auto c = h.chain_stats();
      out << p << "buckets=" << h.bucket_count() << '\n' << p << "avg_chain=" << fmt_double(c.avg_chain) << '\n';
      out << p << "max_chain=" << c.max_chain << '\n' << p << "empty_buckets=" << c.empty_buckets << '\n';
    }
    if (e->def.kind == IndexKind::columnstore) {
      auto& cs = db.columnstore(e->def.name);
      out << p << "rowgroups=" << cs.rowgroups().size() << '\n' << p << "delta_rows=" << cs.delta_rows() << '\n';
    }
  }
}

std::uint64_t import_csv(Engine& db, const std::string& table, const std::string& path) {
  const TableEntry* t = db.catalog().find_table(table);
  if (!t) throw Error(ErrorCode::not_found, "no table '" + table + "'");
  const Schema schema = t->def.schema;
  auto records = parse_csv(read_file(path));
  if (records.empty()) throw Error(ErrorCode::header_mismatch, "CSV has no header line");
  const auto& header = records.front().fields;
  bool match = header.size() == schema.size();
  for (std::size_t i = 0; match && i < header.size(); ++i) match = header[i].text == schema[i].name;
  if (!match) {
    std::string want;
    for (const auto& c : schema.columns()) want += (want.empty() ? "" : ",") + c.name;
    throw Error(ErrorCode::header_mismatch, "CSV header does not match columns " + want);
  }
  std::vector<Row> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() == 1 && !rec.fields[0].quoted && rec.fields[0].text.empty() && schema.size() > 1) continue;
    if (rec.fields.size() != schema.size()) {
      throw Error(ErrorCode::parse_error, "line " + std::to_string(rec.line) + ": expected " +
                                              std::to_string(schema.size()) + " fields, found " +
                                              std::to_string(rec.fields.size()));
    }
    Row row;
    for (std::size_t i = 0; i < schema.size(); ++i) row.push_back(parse_csv_value(schema[i], rec.fields[i], rec.line));
    try {
      row = conform_row(schema, std::move(row));
    } catch (const Error& e) {
      std::string msg = e.what();
      msg.erase(0, to_string(e.code()).size() + 2);
      throw Error(e.code(), "line " + std::to_string(rec.line) + ": " + msg);
    }
    rows.push_back(std::move(row));
  }
  return db.insert(table, std::move(rows));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Page-based storage engine with B-tree, hash and columnstore indexes", "pdex"};
  app.require_subcommand(1, 1);
  app.fallthrough(false);

  std::string db, table, name, target, text, path, primary_key, include, filter, kind_flag, index_opt, density_cols,
      selectivity_pred;
  std::vector<std::string> column_defs;
  bool unique = false, analyze = false, do_evaluate = false;
  bool k_clustered = false, k_nonclustered = false, k_hash = false, k_columnstore = false;
  double fill_factor = 1.0;
  std::size_t buckets = 0;
  std::uint32_t page_number = 0;

  auto* c_create_db = app.add_subcommand("create-db", "Create an empty database file");
  c_create_db->add_option("db", db, "Database file")->required();

  auto* c_create_table = app.add_subcommand("create-table", "Create a table");
  c_create_table->add_option("db", db)->required();
  c_create_table->add_option("table", table)->required();
  c_create_table->add_option("columns", column_defs, "name:type[:notnull] (int64, float64, string, blob)")->required();
  c_create_table->add_option("--primary-key", primary_key, "Comma-separated key columns");

  auto* c_create_index = app.add_subcommand("create-index", "Create an index");
  c_create_index->add_option("db", db)->required();
  c_create_index->add_option("name", name)->required();
  c_create_index->add_option("table", table)->required();
  c_create_index->add_option("columns", text, "Comma-separated key columns");
  auto* f_cl = c_create_index->add_flag("--clustered", k_clustered);
  auto* f_nc = c_create_index->add_flag("--nonclustered", k_nonclustered);
  auto* f_hash = c_create_index->add_flag("--hash", k_hash);
  auto* f_cs = c_create_index->add_flag("--columnstore", k_columnstore);
  f_cl->excludes(f_nc, f_hash, f_cs);
  f_nc->excludes(f_hash, f_cs);
  f_hash->excludes(f_cs);
  c_create_index->add_flag("--unique", unique);
  c_create_index->add_option("--include", include, "Comma-separated included columns");
  c_create_index->add_option("--filter", filter, "atom [AND atom]...");
  c_create_index->add_option("--fill-factor", fill_factor, "Leaf fill fraction, 0.5 to 1.0");
  c_create_index->add_option("--buckets", buckets, "Hash bucket count");

  auto* c_drop_index = app.add_subcommand("drop-index", "Drop an index");
  c_drop_index->add_option("db", db)->required();
  c_drop_index->add_option("name", name)->required();

  auto* c_import = app.add_subcommand("import", "Load CSV rows into a table");
  c_import->add_option("db", db)->required();
  c_import->add_option("table", table)->required();
  c_import->add_option("csv", path)->required();

  auto* c_query = app.add_subcommand("query", "Run SELECT / INSERT / UPDATE / DELETE");
  c_query->add_option("db", db)->required();
  c_query->add_option("sql", text)->required();

  auto* c_explain = app.add_subcommand("explain", "Show candidate access plans");
  c_explain->add_option("db", db)->required();
  c_explain->add_option("sql", text)->required();
  c_explain->add_flag("--analyze", analyze, "Execute the chosen plan and report actual reads");

  auto* c_stats = app.add_subcommand("stats", "Print statistics as name=value lines");
  c_stats->add_option("db", db)->required();
  c_stats->add_option("table", table);
  c_stats->add_option("--index", index_opt);
  c_stats->add_option("--density", density_cols, "Comma-separated columns");
  c_stats->add_option("--selectivity", selectivity_pred, "atom [AND atom]...");

  auto* c_page_dump = app.add_subcommand("page-dump", "Print one page");
  c_page_dump->add_option("db", db)->required();
  c_page_dump->add_option("page", page_number)->required();

  auto* c_advise = app.add_subcommand("advise", "Recommend indexes for a workload file");
  c_advise->add_option("db", db)->required();
  c_advise->add_option("workload", path)->required();
  c_advise->add_flag("--evaluate", do_evaluate, "Measure each recommendation on a scratch copy");

  auto* c_trace = app.add_subcommand("trace", "Print the trace file");
  c_trace->add_option("db", db)->required();

  if (!args.empty() && !args[0].starts_with("-") && !app.get_subcommand_no_throw(args[0])) {
    err << "error: unknown command '" << args[0] << "'\n" << app.help();
    return 1;
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    if (code != 0 && e.get_exit_code() != static_cast<int>(CLI::ExitCodes::Success)) {
      err << app.help();
      return 1;
    }
    return 0;
  }

  try {
    DbLock lock(db);
    if (*c_create_db) {
      Engine::create(db, engine_options());
      out << "created " << db << '\n';
      return 0;
    }
    if (*c_page_dump) {
      page_dump(db, page_number, out);
      return 0;
    }
    if (*c_trace) {
      out << "seq\tkind\ttable\tdetail\n";
      std::ifstream in(db + ".trace");
      for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out << line << '\n';
      }
      return 0;
    }
    Engine engine = Engine::open(db, engine_options());
    if (*c_create_table) {
      TableDef def;
      def.name = table;
      std::vector<Column> cols;
      for (const auto& c : column_defs) cols.push_back(parse_column_def(c));
      def.schema = Schema(std::move(cols));
      def.primary_key = split_list(primary_key);
      engine.create_table(def);
      out << "created table " << table << '\n';
    } else if (*c_create_index) {
      IndexDef def;
      def.name = name;
      def.table = table;
      def.kind = k_clustered ? IndexKind::clustered
                 : k_hash    ? IndexKind::hash
                 : k_columnstore ? IndexKind::columnstore
                                 : IndexKind::nonclustered;
      def.key_columns = split_list(text);
      def.included_columns = split_list(include);
      def.unique = unique;
      if (!filter.empty()) def.filter = parse_conjunction(filter);
      def.fill_factor = fill_factor;
      def.buckets = buckets;
      if (def.kind == IndexKind::hash && c_create_index->count("--buckets") && buckets == 0) {
        throw Error(ErrorCode::invalid_bucket_count, "bucket count must be at least 1");
      }
      engine.create_index(def);
      out << "created index " << name << '\n';
    } else if (*c_drop_index) {
      engine.drop_index(name);
      out << "dropped index " << name << '\n';
    } else if (*c_import) {
      const auto n = import_csv(engine, table, path);
      out << "imported " << n << " rows\n";
    } else if (*c_query) {
      print_result(engine.run(parse_statement(text)), out);
    } else if (*c_explain) {
      Query q = parse_query(text);
      if (analyze) out << engine.execute(q).explain.rendered();
      else out << engine.explain(q).rendered();
    } else if (*c_stats) {
      print_stats(engine, table, index_opt, density_cols, selectivity_pred, out);
    } else if (*c_advise) {
      Workload w = parse_workload(read_file(path));
      for (const auto& r : recommend(engine, w)) {
        out << render_recommendation(r);
        if (do_evaluate) {
          Evaluation ev = evaluate(engine, r, w);
          out << " reads_before=" << fmt_double(ev.reads_before) << " reads_after=" << fmt_double(ev.reads_after);
        }
        out << '\n';
      }
    }
    engine.flush();
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_user_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace pdex
