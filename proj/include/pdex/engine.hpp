#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdex/btree.hpp"
#include "pdex/catalog.hpp"
#include "pdex/columnstore.hpp"
#include "pdex/hash_index.hpp"
#include "pdex/planner.hpp"
#include "pdex/sql.hpp"
#include "pdex/stats.hpp"

namespace pdex {

struct EngineOptions {
  bool trace_file = false;  // append events to <db>.trace
  bool keep_trace = true;   // keep events in memory for trace()
  std::size_t columnstore_threshold = Columnstore::kDefaultThreshold;
};

enum class TraceKind { insert, erase, update_in_place, index_maintain, tuple_move, plan_chosen };

// INSERT, DELETE, UPDATE_IN_PLACE, INDEX_MAINTAIN, TUPLE_MOVE, PLAN_CHOSEN
std::string_view to_string(TraceKind kind);
std::optional<TraceKind> parse_trace_kind(std::string_view text);

// Row-changing events carry JSON details: {"row":[..]} for INSERT/DELETE,
// {"old":[..],"new":[..]} for UPDATE_IN_PLACE.
struct TraceEvent {
  std::uint64_t seq = 0;
  TraceKind kind = TraceKind::insert;
  std::string table;
  std::string detail;
};

std::string format_trace_line(const TraceEvent& e);  // seq \t kind \t table \t detail
TraceEvent parse_trace_line(std::string_view line);

struct QueryResult {
  std::vector<std::string> columns;
  std::vector<Row> rows;
  PlanExplain explain;
  std::uint64_t affected = 0;  // DML statements
};

struct TableInfo {
  Organization organization = Organization::heap;
  std::uint64_t rows = 0;
  std::uint64_t heap_pages = 0;
  std::uint64_t forwarded_rows = 0;
  std::uint64_t data_pages = 0;  // heap pages, or clustered leaf pages
};

struct AuditReport {
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
};

// One database file plus its memory-resident hash indexes. Single-threaded.
class Engine {
 public:
  static Engine create(const std::filesystem::path& path, EngineOptions options = {});
  static Engine open(const std::filesystem::path& path, EngineOptions options = {});

  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;
  ~Engine();

  // PRIMARY KEY columns become NOT NULL; the key gets a unique clustered index
  // named pk_<table>.
  void create_table(TableDef def);
  // Adds a primary key later: unique clustered, or unique nonclustered when a
  // clustered index already exists.
  void declare_primary_key(const std::string& table, std::vector<std::string> columns);
  void create_index(IndexDef def);
  void drop_index(const std::string& name);

  std::uint64_t insert(const std::string& table, Row row);
  std::uint64_t insert(const std::string& table, std::vector<Row> rows);
  std::uint64_t update(const std::string& table, const Conjunction& where, const std::vector<Assignment>& set);
  std::uint64_t erase(const std::string& table, const Conjunction& where);

  QueryResult run(const Statement& statement);
  QueryResult execute(const Query& query);
  // Executes a specific candidate (from enumerate) instead of the chosen one.
  QueryResult execute_plan(const Query& query, const AccessPlan& plan);
  PlanExplain explain(const Query& query);
  std::vector<AccessPlan> enumerate(const Query& query);
  // Candidates as if `hypothetical` existed; its shape comes from the capacity
  // formula over the current rows and nothing is built.
  std::vector<AccessPlan> what_if(const Query& query, const IndexDef& hypothetical);

  Ratio density(const std::string& table, const std::vector<std::string>& columns);
  SelectivityReport selectivity(const std::string& table, const Conjunction& predicate);
  IndexStats index_stats(const std::string& index);
  TableInfo table_info(const std::string& table);
  // Base rows in storage order.
  std::vector<Row> rows(const std::string& table);

  ValidationReport validate_index(const std::string& index);
  // Compares every index's entries with the entries derived from the base rows.
  AuditReport audit();

  BTree btree(const std::string& index);
  const HashIndex& hash_index(const std::string& index);
  Columnstore& columnstore(const std::string& index);

  // Applies an INSERT / DELETE / UPDATE_IN_PLACE event; other kinds are ignored.
  void replay(const TraceEvent& event);

  const Catalog& catalog() const;
  Pager& pager();
  const IoCounters& counters() const;
  const std::vector<TraceEvent>& trace() const;
  void clear_trace();
  const std::filesystem::path& path() const;

  // Writes the catalog (table and index storage state) to the file.
  void flush();

 private:
  struct Impl;
  explicit Engine(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace pdex
