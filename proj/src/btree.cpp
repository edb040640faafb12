#include "pdex/btree.hpp"

#include <algorithm>
#include <cmath>

#include "pdex/error.hpp"
#include "pdex/key_encoding.hpp"

namespace pdex {

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::none: return "ok";
    case Violation::ordering: return "ordering-violation";
    case Violation::balance: return "balance-violation";
    case Violation::separator: return "separator-violation";
    case Violation::sibling: return "sibling-violation";
    case Violation::unique: return "unique-violation";
    case Violation::page_kind: return "page-kind-violation";
  }
  return "?";
}

namespace {

std::size_t key_len(std::string_view rec) {
  return static_cast<unsigned char>(rec[0]) | (static_cast<std::size_t>(static_cast<unsigned char>(rec[1])) << 8);
}

std::string_view rec_key(std::string_view rec) { return rec.substr(2, key_len(rec)); }
std::string_view rec_value(std::string_view rec) { return rec.substr(2 + key_len(rec)); }

std::uint32_t rec_child(std::string_view rec) {
  auto v = rec_value(rec);
  std::uint32_t n = 0;
  for (int i = 3; i >= 0; --i) n = (n << 8) | static_cast<unsigned char>(v[i]);
  return n;
}

std::string make_record(std::string_view key, std::string_view tail) {
  std::string rec;
  rec.reserve(2 + key.size() + tail.size());
  rec.push_back(static_cast<char>(key.size() & 0xFF));
  rec.push_back(static_cast<char>(key.size() >> 8));
  rec += key;
  rec += tail;
  return rec;
}

std::string internal_record(std::string_view key, std::uint32_t child) {
  char tail[4];
  for (int i = 0; i < 4; ++i) tail[i] = static_cast<char>((child >> (8 * i)) & 0xFF);
  return make_record(key, std::string_view(tail, 4));
}

std::string_view key_at(const Page& p, std::uint16_t i) { return rec_key(p.record(i)); }

// First slot whose key is >= key.
std::uint16_t lower_bound(const Page& p, std::string_view key) {
  std::uint16_t lo = 0, hi = p.slot_count();
  while (lo < hi) {
    std::uint16_t mid = static_cast<std::uint16_t>(lo + (hi - lo) / 2);
    if (key_at(p, mid) < key) lo = static_cast<std::uint16_t>(mid + 1);
    else hi = mid;
  }
  return lo;
}

// Child slot of an internal node covering `key`: last slot whose separator is <= key.
std::uint16_t route(const Page& p, std::string_view key) {
  std::uint16_t lo = 1, hi = p.slot_count();
  while (lo < hi) {
    std::uint16_t mid = static_cast<std::uint16_t>(lo + (hi - lo) / 2);
    if (key_at(p, mid) <= key) lo = static_cast<std::uint16_t>(mid + 1);
    else hi = mid;
  }
  return static_cast<std::uint16_t>(lo - 1);
}

std::vector<std::string> all_records(const Page& p) {
  std::vector<std::string> out;
  out.reserve(p.slot_count());
  for (std::uint16_t i = 0; i < p.slot_count(); ++i) out.emplace_back(p.record(i));
  return out;
}

void fill(Page& p, std::span<const std::string> records) {
  p.clear_records();
  for (const auto& r : records) p.slot_insert(r);
}

bool is_leaf(const Page& p) { return p.kind() == PageKind::btree_leaf; }

// Shortest prefix of `right` that still sorts after `left` (requires left < right).
std::string separator_between(std::string_view left, std::string_view right) {
  for (std::size_t n = 1; n < right.size(); ++n) {
    if (right.substr(0, n) > left) return std::string(right.substr(0, n));
  }
  return std::string(right);
}

}  // namespace

BTree::BTree(Pager& pager, PageId root, bool unique) : pager_(pager), root_(root), unique_(unique) {}

BTree BTree::create(Pager& pager, bool unique) {
  return BTree(pager, pager.allocate_page(PageKind::btree_leaf, 0), unique);
}

void BTree::check_entry(std::string_view key, std::string_view value) const {
  if (key.size() > kMaxKeySize || leaf_record_size(key.size(), value.size()) > kMaxLeafRecord) {
    throw Error(ErrorCode::entry_too_large, "index entry of " +
                                                std::to_string(leaf_record_size(key.size(), value.size())) +
                                                " bytes (key " + std::to_string(key.size()) + ")");
  }
}

BTree BTree::bulk_build(Pager& pager, bool unique, double fill_factor, std::span<const BTreeEntry> entries) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].key.size() > kMaxKeySize ||
        leaf_record_size(entries[i].key.size(), entries[i].value.size()) > kMaxLeafRecord) {
      throw Error(ErrorCode::entry_too_large, "bulk build entry too large");
    }
    if (i > 0 && !(entries[i - 1].key < entries[i].key)) {
      if (entries[i - 1].key == entries[i].key) throw Error(ErrorCode::duplicate_key, "duplicate key in bulk build");
      throw Error(ErrorCode::invalid_index_def, "bulk build input is not sorted");
    }
  }
  if (entries.empty()) return create(pager, unique);

  const auto budget = static_cast<std::size_t>(std::floor(fill_factor * static_cast<double>(kPageBodySize)));

  struct Node {
    std::string first_key;  // separator routing to this node
    std::uint32_t page;
  };
  std::vector<Node> level_nodes;

  PageId cur_id = pager.allocate_page(PageKind::btree_leaf, 0);
  Page cur(cur_id, PageKind::btree_leaf, 0);
  std::size_t used = 0;
  level_nodes.push_back({entries.front().key, cur_id.page_number});
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    std::string rec = make_record(e.key, e.value);
    if (used > 0 && used + rec.size() + kSlotSize > budget) {
      PageId next = pager.allocate_page(PageKind::btree_leaf, 0);
      cur.set_right_sibling(next);
      pager.write_page(cur);
      cur = Page(next, PageKind::btree_leaf, 0);
      used = 0;
      level_nodes.push_back({separator_between(entries[i - 1].key, e.key), next.page_number});
    }
    cur.slot_insert(rec);
    used += rec.size() + kSlotSize;
  }
  pager.write_page(cur);

  std::uint8_t level = 0;
  while (level_nodes.size() > 1) {
    ++level;
    std::vector<Node> parents;
    PageId pid = pager.allocate_page(PageKind::btree_internal, level);
    Page parent(pid, PageKind::btree_internal, level);
    parents.push_back({level_nodes.front().first_key, pid.page_number});
    for (const auto& child : level_nodes) {
      std::string rec = internal_record(parent.slot_count() == 0 ? std::string_view{} : std::string_view(child.first_key),
                                        child.page);
      if (parent.slot_count() > 0 && parent.used_bytes() + rec.size() + kSlotSize > kPageBodySize) {
        pager.write_page(parent);
        pid = pager.allocate_page(PageKind::btree_internal, level);
        parent = Page(pid, PageKind::btree_internal, level);
        parents.push_back({child.first_key, pid.page_number});
        rec = internal_record({}, child.page);
      }
      parent.slot_insert(rec);
    }
    pager.write_page(parent);
    level_nodes = std::move(parents);
  }
  return BTree(pager, page_id(level_nodes.front().page), unique);
}

void BTree::insert(std::string_view key, std::string_view value) { put(key, value, false); }

void BTree::replace(std::string_view key, std::string_view value) { put(key, value, true); }

void BTree::put(std::string_view key, std::string_view value, bool replace) {
  check_entry(key, value);
  std::vector<PathStep> path;
  Page page = pager_.read_page(root_);
  while (!is_leaf(page)) {
    auto idx = route(page, key);
    PageId child = page_id(rec_child(page.record(idx)));
    path.push_back({std::move(page), idx});
    page = pager_.read_page(child);
  }
  auto pos = lower_bound(page, key);
  bool exists = pos < page.slot_count() && key_at(page, pos) == key;
  if (replace) {
    if (!exists) throw Error(ErrorCode::entry_not_found, "no entry to replace");
    page.slot_remove_at(pos);
  } else if (exists) {
    throw Error(ErrorCode::duplicate_key, unique_ ? "unique index already holds this key" : "entry already present");
  }
  std::string rec = make_record(key, value);
  if (page.used_bytes() + rec.size() + kSlotSize <= kPageBodySize) {
    page.slot_insert_at(pos, rec);
    pager_.write_page(page);
    return;
  }
  auto records = all_records(page);
  records.insert(records.begin() + pos, std::move(rec));
  split(std::move(page), std::move(records), path);
}

void BTree::split(Page page, std::vector<std::string> records, std::vector<PathStep>& path) {
  const bool leaf = is_leaf(page);
  const PageKind kind = page.kind();
  const std::uint8_t level = page.level();
  const std::size_t n = records.size();

  std::vector<std::size_t> prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + records[i].size() + kSlotSize;
  std::size_t best = 1, best_cost = SIZE_MAX;
  for (std::size_t s = 1; s < n; ++s) {
    std::size_t left = prefix[s];
    std::size_t right = prefix[n] - prefix[s];
    if (!leaf) right -= key_len(records[s]);  // right's first separator is dropped
    std::size_t cost = std::max(left, right);
    if (cost < best_cost) {
      best_cost = cost;
      best = s;
    }
  }
  if (best_cost > kPageBodySize) throw Error(ErrorCode::entry_too_large, "node cannot be split into two pages");

  std::vector<std::string> left(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(best));
  std::vector<std::string> right(records.begin() + static_cast<std::ptrdiff_t>(best), records.end());
  std::string separator = leaf ? separator_between(rec_key(left.back()), rec_key(right.front()))
                               : std::string(rec_key(right.front()));
  if (!leaf) right.front() = internal_record({}, rec_child(right.front()));

  if (path.empty()) {
    // Root split: contents move down, the root page becomes the new top level.
    PageId l = pager_.allocate_page(kind, level);
    PageId r = pager_.allocate_page(kind, level);
    Page lp(l, kind, level), rp(r, kind, level);
    fill(lp, left);
    fill(rp, right);
    if (leaf) lp.set_right_sibling(r);
    pager_.write_page(lp);
    pager_.write_page(rp);
    Page root(root_, PageKind::btree_internal, static_cast<std::uint8_t>(level + 1));
    root.slot_insert(internal_record({}, l.page_number));
    root.slot_insert(internal_record(separator, r.page_number));
    pager_.write_page(root);
    return;
  }

  PageId r = pager_.allocate_page(kind, level);
  Page rp(r, kind, level);
  fill(rp, right);
  if (leaf) {
    rp.set_right_sibling(page.right_sibling());
    page.set_right_sibling(r);
  }
  fill(page, left);
  pager_.write_page(page);
  pager_.write_page(rp);

  PathStep step = std::move(path.back());
  path.pop_back();
  std::string rec = internal_record(separator, r.page_number);
  auto pos = static_cast<std::uint16_t>(step.child + 1);
  if (step.page.used_bytes() + rec.size() + kSlotSize <= kPageBodySize) {
    step.page.slot_insert_at(pos, rec);
    pager_.write_page(step.page);
    return;
  }
  auto parent_records = all_records(step.page);
  parent_records.insert(parent_records.begin() + pos, std::move(rec));
  split(std::move(step.page), std::move(parent_records), path);
}

void BTree::erase(std::string_view key) {
  Page page = pager_.read_page(root_);
  while (!is_leaf(page)) page = pager_.read_page(page_id(rec_child(page.record(route(page, key)))));
  auto pos = lower_bound(page, key);
  if (pos >= page.slot_count() || key_at(page, pos) != key) {
    throw Error(ErrorCode::entry_not_found, "no index entry with the given key");
  }
  page.slot_remove_at(pos);
  pager_.write_page(page);
}

std::optional<std::string> BTree::find(std::string_view key) {
  Page page = pager_.read_page(root_);
  while (!is_leaf(page)) page = pager_.read_page(page_id(rec_child(page.record(route(page, key)))));
  auto pos = lower_bound(page, key);
  if (pos < page.slot_count() && key_at(page, pos) == key) return std::string(rec_value(page.record(pos)));
  return std::nullopt;
}

void BTree::scan(std::optional<std::string_view> lo, std::optional<std::string_view> hi, const Visitor& visit) {
  Page page = pager_.read_page(root_);
  // Upper fence of the current subtree: every key to the right is >= fence.
  std::optional<std::string> fence;
  while (!is_leaf(page)) {
    std::uint16_t idx = lo ? route(page, *lo) : 0;
    if (idx + 1 < page.slot_count()) fence = std::string(key_at(page, static_cast<std::uint16_t>(idx + 1)));
    page = pager_.read_page(page_id(rec_child(page.record(idx))));
  }
  std::uint16_t pos = lo ? lower_bound(page, *lo) : 0;
  for (;;) {
    for (std::uint16_t i = pos; i < page.slot_count(); ++i) {
      auto rec = page.record(i);
      auto k = rec_key(rec);
      if (hi && k >= *hi) return;
      if (!visit(k, rec_value(rec))) return;
    }
    auto sibling = page.right_sibling();
    if (!sibling) return;
    if (hi && fence && *fence >= *hi) return;
    fence.reset();
    page = pager_.read_page(*sibling);
    pos = 0;
  }
}

void BTree::scan_prefix(std::string_view prefix, const Visitor& visit) {
  auto hi = prefix_successor(prefix);
  if (hi) scan(prefix, std::string_view(*hi), visit);
  else scan(prefix, std::nullopt, visit);
}

std::uint32_t BTree::depth() { return pager_.read_page(root_).level() + 1u; }

BTreeShape BTree::shape() {
  BTreeShape s;
  s.leaf_pages = 0;
  std::vector<PageId> stack{root_};
  bool first = true;
  while (!stack.empty()) {
    Page p = pager_.read_page(stack.back());
    stack.pop_back();
    if (first) {
      s.depth = p.level() + 1u;
      first = false;
    }
    if (is_leaf(p)) {
      ++s.leaf_pages;
      s.entries += p.slot_count();
      continue;
    }
    ++s.internal_pages;
    for (std::uint16_t i = p.slot_count(); i-- > 0;) stack.push_back(page_id(rec_child(p.record(i))));
  }
  return s;
}

ValidationReport BTree::validate() {
  ValidationReport report;
  struct LeafInfo {
    PageId id;
    std::optional<PageId> sibling;
  };
  std::vector<LeafInfo> leaves;
  auto fail = [&](Violation v, std::string detail) {
    if (report.ok()) report = ValidationReport{v, std::move(detail)};
  };

  std::function<void(PageId, int, std::optional<std::string>, std::optional<std::string>)> visit =
      [&](PageId id, int expected_level, std::optional<std::string> lo, std::optional<std::string> hi) {
        if (!report.ok()) return;
        Page p = pager_.read_page(id);
        const std::string where = "page " + std::to_string(id.page_number);
        if (p.kind() != PageKind::btree_leaf && p.kind() != PageKind::btree_internal) {
          return fail(Violation::page_kind, where + " is not a btree page");
        }
        if (expected_level >= 0 && p.level() != expected_level) {
          return fail(Violation::balance, where + " at level " + std::to_string(p.level()) + ", expected " +
                                              std::to_string(expected_level));
        }
        if (is_leaf(p) != (p.level() == 0)) {
          return fail(Violation::balance, where + " kind does not match level " + std::to_string(p.level()));
        }
        const auto n = p.slot_count();
        if (!is_leaf(p) && n == 0) return fail(Violation::balance, where + " is an internal node without children");
        const std::uint16_t first_key = is_leaf(p) ? 0 : 1;
        if (!is_leaf(p) && !key_at(p, 0).empty()) {
          return fail(Violation::separator, where + " first internal entry carries a key");
        }
        for (std::uint16_t i = first_key; i < n; ++i) {
          auto k = key_at(p, i);
          if (i > first_key) {
            auto prev = key_at(p, static_cast<std::uint16_t>(i - 1));
            if (prev == k) return fail(unique_ ? Violation::unique : Violation::ordering, where + " repeats a key");
            if (prev > k) return fail(Violation::ordering, where + " slots " + std::to_string(i - 1) + "," +
                                                               std::to_string(i) + " out of order");
          }
          if ((lo && k < *lo) || (hi && k >= *hi)) {
            return fail(Violation::separator, where + " slot " + std::to_string(i) + " outside separator bounds");
          }
        }
        if (is_leaf(p)) {
          leaves.push_back({id, p.right_sibling()});
          return;
        }
        for (std::uint16_t i = 0; i < n; ++i) {
          std::optional<std::string> child_lo = i == 0 ? lo : std::optional<std::string>(key_at(p, i));
          std::optional<std::string> child_hi =
              i + 1 < n ? std::optional<std::string>(key_at(p, static_cast<std::uint16_t>(i + 1))) : hi;
          visit(page_id(rec_child(p.record(i))), p.level() - 1, std::move(child_lo), std::move(child_hi));
        }
      };
  visit(root_, -1, std::nullopt, std::nullopt);
  if (!report.ok()) return report;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    std::optional<PageId> expected = i + 1 < leaves.size() ? std::optional<PageId>(leaves[i + 1].id) : std::nullopt;
    if (leaves[i].sibling != expected) {
      return ValidationReport{Violation::sibling,
                              "leaf " + std::to_string(leaves[i].id.page_number) + " has a wrong right sibling"};
    }
  }
  return report;
}

}  // namespace pdex
