#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdex/predicate.hpp"
#include "pdex/value.hpp"

namespace pdex {

// Exact non-negative rational. Equality is by cross-multiplication.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Ratio& o) const {
    return static_cast<unsigned __int128>(num) * o.den == static_cast<unsigned __int128>(o.num) * den;
  }
};

std::string to_string(const Ratio& r);

struct SelectivityReport {
  Conjunction predicate;
  std::uint64_t matched = 0;
  std::uint64_t total = 0;

  Ratio fraction() const { return total == 0 ? Ratio{0, 1} : Ratio{matched, total}; }
};

struct IndexStats {
  std::uint32_t depth = 1;
  std::uint64_t leaf_pages = 1;
  std::uint64_t row_count = 0;
  std::optional<Ratio> density;  // absent when the index is empty
};

inline constexpr double kDenseThreshold = 0.1;
inline constexpr double kSelectiveThreshold = 0.1;

// 1 / number of distinct tuples over `columns`. NULL counts as one value.
// Throws empty-table.
Ratio density(const Schema& schema, std::span<const Row> rows, std::span<const std::string> columns);
std::uint64_t distinct_count(const Schema& schema, std::span<const Row> rows, std::span<const std::string> columns);

// Binds the predicate against the schema (type-mismatch / not-found) and counts matches.
SelectivityReport selectivity(const Schema& schema, std::span<const Row> rows, const Conjunction& predicate);

inline bool is_dense(const Ratio& density) { return density.value() >= kDenseThreshold; }
inline bool is_selective(const Ratio& fraction) { return fraction.value() <= kSelectiveThreshold; }

}  // namespace pdex
