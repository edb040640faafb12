#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace pdex {

struct ChainStats {
  double avg_chain = 0.0;  // entries / bucket_count
  std::size_t max_chain = 0;
  std::size_t empty_buckets = 0;
};

struct ProbeStats {
  std::size_t buckets_probed = 0;
  std::size_t entries_examined = 0;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Memory-resident equality index: an array of 8-byte chain heads, each
// heading a singly linked list of (key, locator) entries. New entries are
// prepended. Bucket = fnv1a64(key) & (bucket_count - 1).
class HashIndex {
 public:
  // Bucket count is rounded up to the next power of two; 0 is invalid-bucket-count.
  HashIndex(std::size_t requested_buckets, bool unique);

  static std::size_t round_buckets(std::size_t requested);

  void insert(std::string_view key, std::string_view locator);
  // Removes the entry with this key and locator; false if absent.
  bool erase(std::string_view key, std::string_view locator);

  // Full-key lookup: probes one bucket and walks its chain. On a unique index
  // the walk stops at the first match.
  std::vector<std::string> lookup_equal(std::string_view key, ProbeStats* stats = nullptr) const;

  ChainStats chain_stats() const;

  std::size_t bucket_count() const { return buckets_.size(); }
  std::size_t size() const { return size_; }
  bool unique() const { return unique_; }
  std::size_t bucket_of(std::string_view key) const { return fnv1a64(key) & (buckets_.size() - 1); }
  std::size_t chain_length(std::size_t bucket) const;

  void for_each(const std::function<void(std::string_view key, std::string_view locator)>& visit) const;

 private:
  static constexpr std::uint64_t kEmpty = 0;

  struct Entry {
    std::string key;
    std::string locator;
    std::uint64_t next = kEmpty;  // entry index + 1
  };

  std::vector<std::uint64_t> buckets_;  // entry index + 1, or kEmpty
  std::vector<Entry> entries_;
  std::vector<std::uint64_t> free_;
  std::size_t size_ = 0;
  bool unique_;
};

}  // namespace pdex
