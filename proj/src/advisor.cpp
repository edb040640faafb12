#include "pdex/advisor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>
#include <unistd.h>

#include "pdex/error.hpp"
#include "pdex/key_encoding.hpp"

namespace pdex {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

double parse_weight(std::string_view text, std::size_t line) {
  std::string s(trim(text));
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v) || v < 0) {
    throw Error(ErrorCode::parse_error, "workload line " + std::to_string(line) + ": bad weight '" + s + "'");
  }
  return v;
}

}  // namespace

Workload parse_workload(std::string_view text) {
  Workload w;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto bad = [&](const std::string& why) {
      return Error(ErrorCode::parse_error, "workload line " + std::to_string(line_no) + ": " + why);
    };
    if (line.starts_with("dml:")) {
      auto parts = split(line.substr(4), ':');
      if (parts.size() != 2) throw bad("expected dml:<table>:<ins>,<upd>,<del>");
      auto nums = split(parts[1], ',');
      if (nums.size() != 3) throw bad("expected three DML weights");
      DmlMix mix{parse_weight(nums[0], line_no), parse_weight(nums[1], line_no), parse_weight(nums[2], line_no)};
      w.dml[std::string(parts[0])] = mix;
      continue;
    }
    if (line.starts_with("updates:")) {
      auto parts = split(line.substr(8), ':');
      if (parts.size() != 2) throw bad("expected updates:<table>:<col>=<n>,...");
      auto& cols = w.updated_columns[std::string(parts[0])];
      for (auto item : split(parts[1], ',')) {
        auto eq = item.find('=');
        if (eq == std::string_view::npos) throw bad("expected <col>=<n>");
        cols[std::string(trim(item.substr(0, eq)))] = parse_weight(item.substr(eq + 1), line_no);
      }
      continue;
    }
    double weight = 1.0;
    if (line.starts_with("weight:")) {
      line.remove_prefix(7);
      auto sp = line.find_first_of(" \t");
      if (sp == std::string_view::npos) throw bad("weight without a query");
      weight = parse_weight(line.substr(0, sp), line_no);
      line = trim(line.substr(sp));
    }
    try {
      w.entries.push_back({parse_query(line), weight});
    } catch (const Error& e) {
      throw bad(e.what());
    }
  }
  return w;
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::create: return "create";
    case Action::avoid: return "avoid";
    case Action::drop_candidate: return "drop-candidate";
  }
  return "?";
}

std::string render_recommendation(const Recommendation& r) {
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
    return out;
  };
  std::ostringstream out;
  out << to_string(r.action) << ' ' << to_string(r.index.kind) << " (" << join(r.index.key_columns) << ") include ("
      << join(r.index.included_columns) << ") filter (" << render_conjunction(r.index.filter) << ") rules=[";
  for (std::size_t i = 0; i < r.rules.size(); ++i) out << (i ? "," : "") << r.rules[i];
  out << "] score=";
  if (r.score == std::floor(r.score)) {
    out << static_cast<long long>(r.score);
  } else {
    out.setf(std::ios::fixed);
    out.precision(2);
    out << r.score;
  }
  return out.str();
}

namespace {

struct Candidate {
  IndexDef def;
  std::set<std::string> rules;
  std::string rationale;
};

struct ColumnFacts {
  std::uint64_t distinct = 0;
  std::uint64_t nulls = 0;
  double avg_key_width = 0;
};

class TableAdvisor {
 public:
  TableAdvisor(Engine& db, const std::string& table, std::vector<const WorkloadEntry*> entries, const Workload& w,
               const AdvisorOptions& opt)
      : db_(db), table_(table), entries_(std::move(entries)), workload_(w), opt_(opt) {
    const TableEntry* t = db_.catalog().find_table(table);
    if (!t) throw Error(ErrorCode::not_found, "workload names unknown table '" + table + "'");
    schema_ = t->def.schema;
    rows_ = db_.rows(table);
    for (const auto& c : schema_.columns()) {
      ColumnFacts f;
      std::set<std::string> seen;
      std::size_t idx = schema_.index_of(c.name);
      double width = 0;
      for (const auto& r : rows_) {
        EncodedKey k;
        append_key_value(k, r[idx]);
        width += static_cast<double>(k.size());
        if (is_null(r[idx])) ++f.nulls;
        seen.insert(std::move(k));
      }
      f.distinct = seen.size();
      f.avg_key_width = rows_.empty() ? 0 : width / static_cast<double>(rows_.size());
      facts_[c.name] = f;
    }
    for (const auto* e : entries_) query_weight_ += e->weight;
    if (auto it = w.dml.find(table); it != w.dml.end()) dml_ = it->second;
  }

  std::vector<Recommendation> run() {
    std::vector<Candidate> cands;
    for (const auto* e : entries_) {
      if (auto c = per_query(*e)) cands.push_back(std::move(*c));
    }
    if (auto c = composite()) cands.push_back(std::move(*c));
    if (auto c = short_clustered()) cands.push_back(std::move(*c));
    cands = dedupe(std::move(cands));

    const TableInfo info = db_.table_info(table_);
    const bool small = info.data_pages <= opt_.small_table_pages;
    std::vector<Recommendation> out;
    std::set<std::string> names;
    for (const auto& ix : db_.catalog().indexes) names.insert(ix.def.name);
    for (auto& c : cands) {
      c.def.name = unique_name(c.def, names);
      try {
        validate_index_def(db_.catalog(), c.def);
      } catch (const Error&) {
        continue;
      }
      names.insert(c.def.name);
      Recommendation r;
      r.index = c.def;
      r.rationale = c.rationale;
      if (small) {
        c.rules.insert("R5");
        r.action = Action::avoid;
        r.rationale = "table has " + std::to_string(info.data_pages) + " data pages; " + r.rationale;
        r.score = 0;
      } else {
        double benefit = benefit_of(c.def);
        if (benefit <= 0) continue;
        r.score = std::max(0.0, benefit - penalty_of(c.def));
      }
      r.rules.assign(c.rules.begin(), c.rules.end());
      out.push_back(std::move(r));
    }
    if (!small && dml_.update > opt_.heavy_update_ratio * query_weight_) heavy_update_guard(out);
    return out;
  }

 private:
  bool is_blob(const std::string& c) const { return schema_[schema_.index_of(c)].type == ColumnType::blob; }

  // Equality columns first; within each group higher distinctness first.
  void order(std::vector<std::string>& cols) const {
    std::sort(cols.begin(), cols.end(), [&](const std::string& a, const std::string& b) {
      const auto da = facts_.at(a).distinct;
      const auto db = facts_.at(b).distinct;
      if (da != db) return da > db;
      return a < b;
    });
  }

  static bool is_point(const ColumnRange& r) {
    return !r.empty && !r.null_only && r.lo && r.hi && r.lo_inclusive && r.hi_inclusive && values_equal(*r.lo, *r.hi);
  }

  static bool is_range(const ColumnRange& r) { return !r.empty && !r.null_only && (r.lo || r.hi); }

  void classify(const Conjunction& where, std::vector<std::string>& eq, std::vector<std::string>& range,
                std::set<std::string>& rules) const {
    for (const auto& c : referenced_columns(where)) {
      ColumnRange r = column_range(where, c);
      if (!is_point(r) && !is_range(r)) continue;
      if (is_blob(c)) {
        rules.insert("R6");
        continue;
      }
      (is_point(r) ? eq : range).push_back(c);
    }
  }

  bool all_distinct(const std::vector<std::string>& cols) const {
    if (rows_.empty()) return false;
    for (const auto& c : cols) {
      if (facts_.at(c).nulls > 1) return false;
    }
    std::vector<std::string> names = cols;
    return distinct_count(schema_, rows_, names) == rows_.size();
  }

  std::optional<Candidate> per_query(const WorkloadEntry& e) {
    Conjunction where = bind_conjunction(schema_, e.query.where);
    Candidate c;
    std::vector<std::string> eq, range;
    classify(where, eq, range, c.rules);
    if (eq.empty() && range.empty()) return std::nullopt;
    order(eq);
    order(range);
    c.def.table = table_;
    c.def.kind = IndexKind::nonclustered;
    c.def.key_columns = eq;
    if (!range.empty()) c.def.key_columns.push_back(range.front());
    c.rules.insert("R1");
    c.rationale = "seek on " + render_conjunction(where);

    Query bound = e.query;
    bound.where = where;
    const bool star = !e.query.aggregate && e.query.projected.empty();
    if (!star) {
      std::vector<std::string> inc;
      bool blob = false;
      for (const auto& col : query_columns(bound, schema_)) {
        if (std::find(c.def.key_columns.begin(), c.def.key_columns.end(), col) != c.def.key_columns.end()) continue;
        if (is_blob(col)) blob = true;
        inc.push_back(col);
      }
      if (!inc.empty() && !blob) {
        std::sort(inc.begin(), inc.end());
        c.def.included_columns = inc;
        c.rules.insert("R2");
        c.rationale += "; covers the query";
      }
    }
    for (const auto& col : c.def.key_columns) {
      ColumnRange r = column_range(where, col);
      if (!r.non_null || rows_.empty()) continue;
      const double null_fraction = static_cast<double>(facts_.at(col).nulls) / static_cast<double>(rows_.size());
      Conjunction on_col;
      for (const auto& a : where) {
        if (a.column == col) on_col.push_back(a);
      }
      const auto sel = selectivity(schema_, rows_, on_col);
      if (null_fraction >= opt_.skew_null_fraction && sel.fraction().value() <= opt_.selective_fraction) {
        c.def.filter.push_back(Atom{col, CompareOp::is_not_null, {}, {}});
        c.rules.insert("R3");
        c.rationale += "; " + col + " is mostly NULL";
      }
    }
    if (c.def.filter.empty() && all_distinct(c.def.key_columns)) {
      c.def.unique = true;
      c.rules.insert("R8");
    }
    return c;
  }

  std::optional<Candidate> composite() {
    Candidate c;
    std::vector<std::string> eq, range;
    for (const auto* e : entries_) {
      std::vector<std::string> qeq, qrange;
      classify(bind_conjunction(schema_, e->query.where), qeq, qrange, c.rules);
      for (auto& col : qeq) {
        if (std::find(eq.begin(), eq.end(), col) == eq.end()) eq.push_back(col);
      }
      for (auto& col : qrange) {
        if (std::find(range.begin(), range.end(), col) == range.end()) range.push_back(col);
      }
    }
    std::erase_if(range, [&](const std::string& col) { return std::find(eq.begin(), eq.end(), col) != eq.end(); });
    if (eq.size() + range.size() < 2) return std::nullopt;
    order(eq);
    order(range);
    c.def.table = table_;
    c.def.kind = IndexKind::nonclustered;
    c.def.key_columns = eq;
    c.def.key_columns.insert(c.def.key_columns.end(), range.begin(), range.end());
    c.rules.insert("R1");
    c.rationale = "equality columns first, then by distinct values";
    if (all_distinct(c.def.key_columns)) {
      c.def.unique = true;
      c.rules.insert("R8");
    }
    return c;
  }

  std::optional<Candidate> short_clustered() {
    if (db_.catalog().clustered_index(table_) || rows_.empty()) return std::nullopt;
    std::optional<std::string> best;
    double best_width = 0;
    for (const auto& col : schema_.columns()) {
      if (col.type == ColumnType::blob) continue;
      const auto& f = facts_.at(col.name);
      if (f.nulls > 0 || f.distinct != rows_.size()) continue;
      if (!best || f.avg_key_width < best_width) {
        best = col.name;
        best_width = f.avg_key_width;
      }
    }
    if (!best) return std::nullopt;
    Candidate c;
    c.def.table = table_;
    c.def.kind = IndexKind::clustered;
    c.def.key_columns = {*best};
    c.def.unique = true;
    c.rules = {"R7", "R8"};
    c.rationale = "narrowest unique non-null column";
    return c;
  }

  static std::vector<Candidate> dedupe(std::vector<Candidate> cands) {
    std::vector<Candidate> out;
    for (auto& c : cands) {
      auto same = std::find_if(out.begin(), out.end(), [&](const Candidate& o) {
        return o.def.kind == c.def.kind && o.def.key_columns == c.def.key_columns &&
               o.def.included_columns == c.def.included_columns && o.def.filter == c.def.filter &&
               o.def.unique == c.def.unique;
      });
      if (same == out.end()) {
        out.push_back(std::move(c));
      } else {
        same->rules.insert(c.rules.begin(), c.rules.end());
      }
    }
    return out;
  }

  std::string unique_name(const IndexDef& def, const std::set<std::string>& taken) const {
    std::string base = (def.kind == IndexKind::clustered ? "cx_" : "ix_") + table_;
    for (const auto& k : def.key_columns) base += "_" + k;
    if (!def.included_columns.empty()) base += "_cov";
    if (!def.filter.empty()) base += "_flt";
    std::string name = base;
    for (int i = 2; taken.contains(name); ++i) name = base + "_" + std::to_string(i);
    return name;
  }

  double benefit_of(const IndexDef& def) {
    double total = 0;
    for (const auto* e : entries_) {
      const auto before = db_.enumerate(e->query).front().estimated_reads;
      const auto after = db_.what_if(e->query, def).front().estimated_reads;
      if (after < before) total += e->weight * static_cast<double>(before - after);
    }
    return total;
  }

  double penalty_of(const IndexDef& def) const {
    double p = dml_.insert + dml_.erase;
    auto it = workload_.updated_columns.find(table_);
    if (it == workload_.updated_columns.end() || def.kind == IndexKind::clustered) return p + dml_.update;
    for (const auto& [col, freq] : it->second) {
      const bool in_key = std::find(def.key_columns.begin(), def.key_columns.end(), col) != def.key_columns.end();
      const bool in_inc =
          std::find(def.included_columns.begin(), def.included_columns.end(), col) != def.included_columns.end();
      if ((in_key || in_inc) && freq > 0) return p + dml_.update;
    }
    return p;
  }

  void heavy_update_guard(std::vector<Recommendation>& out) {
    std::stable_sort(out.begin(), out.end(), [](const Recommendation& a, const Recommendation& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.index.name < b.index.name;
    });
    std::size_t kept = 0;
    for (auto& r : out) {
      if (r.action != Action::create) continue;
      if (++kept > opt_.heavy_update_cap) {
        r.action = Action::avoid;
        r.rules.push_back("R4");
        r.rationale = "table is heavily updated; " + r.rationale;
        r.score = 0;
      }
    }
    std::set<std::string> used;
    for (const auto* e : entries_) used.insert(db_.explain(e->query).plan().index);
    for (const auto* ix : db_.catalog().indexes_of(table_)) {
      if (ix->def.kind != IndexKind::nonclustered && ix->def.kind != IndexKind::hash) continue;
      if (used.contains(ix->def.name)) continue;
      Recommendation r;
      r.action = Action::drop_candidate;
      r.index = ix->def;
      r.rules = {"R4"};
      r.rationale = "unused by the workload on a heavily updated table";
      r.score = penalty_of(ix->def);
      out.push_back(std::move(r));
    }
  }

  Engine& db_;
  std::string table_;
  std::vector<const WorkloadEntry*> entries_;
  const Workload& workload_;
  const AdvisorOptions& opt_;
  Schema schema_;
  std::vector<Row> rows_;
  std::map<std::string, ColumnFacts> facts_;
  double query_weight_ = 0;
  DmlMix dml_;
};

}  // namespace

std::vector<Recommendation> recommend(Engine& db, const Workload& workload, const AdvisorOptions& options) {
  if (workload.entries.empty()) throw Error(ErrorCode::empty_workload, "workload has no queries");
  std::map<std::string, std::vector<const WorkloadEntry*>> by_table;
  for (const auto& e : workload.entries) by_table[e.query.table].push_back(&e);
  std::vector<Recommendation> out;
  for (auto& [table, entries] : by_table) {
    auto recs = TableAdvisor(db, table, entries, workload, options).run();
    out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  std::stable_sort(out.begin(), out.end(), [](const Recommendation& a, const Recommendation& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index.name < b.index.name;
  });
  return out;
}

namespace {

double weighted_reads(Engine& db, const Workload& workload) {
  double total = 0;
  for (const auto& e : workload.entries) {
    total += e.weight * static_cast<double>(db.execute(e.query).explain.actual_reads.value_or(0));
  }
  return total;
}

}  // namespace

Evaluation evaluate(Engine& db, const Recommendation& recommendation, const Workload& workload) {
  static std::atomic<unsigned> counter{0};
  db.flush();
  const auto scratch = std::filesystem::temp_directory_path() /
                       ("pdex-eval-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".pdex");
  std::filesystem::copy_file(db.path(), scratch, std::filesystem::copy_options::overwrite_existing);
  Evaluation ev;
  try {
    EngineOptions opts;
    opts.keep_trace = false;
    Engine copy = Engine::open(scratch, opts);
    ev.reads_before = weighted_reads(copy, workload);
    switch (recommendation.action) {
      case Action::create: copy.create_index(recommendation.index); break;
      case Action::drop_candidate: copy.drop_index(recommendation.index.name); break;
      case Action::avoid: break;
    }
    ev.reads_after = weighted_reads(copy, workload);
  } catch (...) {
    std::filesystem::remove(scratch);
    throw;
  }
  std::filesystem::remove(scratch);
  return ev;
}

}  // namespace pdex
