#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pdex/catalog.hpp"
#include "pdex/engine.hpp"
#include "pdex/sql.hpp"

namespace pdex {

struct WorkloadEntry {
  Query query;
  double weight = 1.0;
};

struct DmlMix {
  double insert = 0;
  double update = 0;
  double erase = 0;

  double total() const { return insert + update + erase; }
};

struct Workload {
  std::vector<WorkloadEntry> entries;
  std::map<std::string, DmlMix> dml;
  // table -> column -> update frequency
  std::map<std::string, std::map<std::string, double>> updated_columns;
};

// Text form, one item per line (blank lines and # comments ignored):
//   weight:<n> SELECT ...                      query (weight 1 without the prefix)
//   dml:<table>:<ins>,<upd>,<del>              DML mix
//   updates:<table>:<col>=<n>[,<col>=<n>...]   column update frequencies
Workload parse_workload(std::string_view text);

enum class Action { create, avoid, drop_candidate };

std::string_view to_string(Action action);

struct Recommendation {
  Action action = Action::create;
  IndexDef index;
  std::vector<std::string> rules;  // R1..R8
  std::string rationale;
  double score = 0;
};

struct AdvisorOptions {
  std::uint64_t small_table_pages = 8;     // R5
  double selective_fraction = 0.1;         // R3
  double skew_null_fraction = 0.5;         // R3
  double heavy_update_ratio = 2.0;         // R4
  std::size_t heavy_update_cap = 3;        // R4
};

// Ranked by score descending, then index name. Throws empty-workload.
std::vector<Recommendation> recommend(Engine& db, const Workload& workload, const AdvisorOptions& options = {});

// action kind (key cols) include (cols) filter (pred) rules=[...] score=<n>
std::string render_recommendation(const Recommendation& r);

struct Evaluation {
  double reads_before = 0;
  double reads_after = 0;
};

// Copies the database to a scratch file, replays the workload queries before
// and after applying the recommendation, and reports weighted actual reads.
Evaluation evaluate(Engine& db, const Recommendation& recommendation, const Workload& workload);

}  // namespace pdex
