#include "pdex/hash_index.hpp"

#include <algorithm>

#include "pdex/error.hpp"

namespace pdex {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::size_t HashIndex::round_buckets(std::size_t requested) {
  if (requested == 0) throw Error(ErrorCode::invalid_bucket_count, "bucket count must be at least 1");
  std::size_t n = 1;
  while (n < requested) n <<= 1;
  return n;
}

HashIndex::HashIndex(std::size_t requested_buckets, bool unique)
    : buckets_(round_buckets(requested_buckets), kEmpty), unique_(unique) {}

void HashIndex::insert(std::string_view key, std::string_view locator) {
  auto b = bucket_of(key);
  if (unique_) {
    for (auto e = buckets_[b]; e != kEmpty; e = entries_[e - 1].next) {
      if (entries_[e - 1].key == key) throw Error(ErrorCode::duplicate_key, "hash index already holds this key");
    }
  }
  std::uint64_t slot;
  if (!free_.empty()) {
    slot = free_.back();
    free_.pop_back();
    entries_[slot - 1] = Entry{std::string(key), std::string(locator), buckets_[b]};
  } else {
    entries_.push_back(Entry{std::string(key), std::string(locator), buckets_[b]});
    slot = entries_.size();
  }
  buckets_[b] = slot;
  ++size_;
}

bool HashIndex::erase(std::string_view key, std::string_view locator) {
  auto b = bucket_of(key);
  std::uint64_t* link = &buckets_[b];
  while (*link != kEmpty) {
    Entry& e = entries_[*link - 1];
    if (e.key == key && e.locator == locator) {
      std::uint64_t dead = *link;
      *link = e.next;
      e = Entry{};
      free_.push_back(dead);
      --size_;
      return true;
    }
    link = &e.next;
  }
  return false;
}

std::vector<std::string> HashIndex::lookup_equal(std::string_view key, ProbeStats* stats) const {
  std::vector<std::string> out;
  ProbeStats local;
  local.buckets_probed = 1;
  for (auto e = buckets_[bucket_of(key)]; e != kEmpty; e = entries_[e - 1].next) {
    ++local.entries_examined;
    if (entries_[e - 1].key == key) {
      out.push_back(entries_[e - 1].locator);
      if (unique_) break;
    }
  }
  if (stats) *stats = local;
  return out;
}

std::size_t HashIndex::chain_length(std::size_t bucket) const {
  std::size_t n = 0;
  for (auto e = buckets_[bucket]; e != kEmpty; e = entries_[e - 1].next) ++n;
  return n;
}

ChainStats HashIndex::chain_stats() const {
  ChainStats s;
  for (std::size_t b = 0; b < buckets_.size(); ++b) {
    auto len = chain_length(b);
    if (len == 0) ++s.empty_buckets;
    s.max_chain = std::max(s.max_chain, len);
  }
  s.avg_chain = static_cast<double>(size_) / static_cast<double>(buckets_.size());
  return s;
}

void HashIndex::for_each(const std::function<void(std::string_view, std::string_view)>& visit) const {
  for (auto head : buckets_) {
    for (auto e = head; e != kEmpty; e = entries_[e - 1].next) visit(entries_[e - 1].key, entries_[e - 1].locator);
  }
}

}  // namespace pdex
