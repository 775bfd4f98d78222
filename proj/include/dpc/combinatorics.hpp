#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dpc {

/// Binomial coefficient C(n, k); nullopt when the value does not fit in 64 bits.
std::optional<std::uint64_t> binomial(std::uint64_t n, std::uint64_t k);

/// Pascal table for fast ranking of k-combinations of {1..n}.
///
/// Ranks follow the lexicographic order of strictly increasing id lists, so
/// for n = 5, k = 2 the order is {1,2}, {1,3}, {1,4}, {1,5}, {2,3}, ...
class CombinationIndexer {
 public:
  CombinationIndexer() = default;
  CombinationIndexer(std::uint32_t n, std::uint32_t k);

  std::uint32_t n() const { return n_; }
  std::uint32_t k() const { return k_; }
  std::uint64_t count() const { return count_; }

  /// Rank of a strictly increasing list of 1-based ids. No validation.
  std::uint64_t rank(std::span<const std::uint32_t> ids) const;
  /// Inverse of rank(); writes k ids into out.
  void unrank(std::uint64_t rank, std::span<std::uint32_t> out) const;

 private:
  std::uint64_t choose(std::uint32_t n, std::uint32_t k) const {
    return k > n ? 0 : table_[static_cast<std::size_t>(n) * (k_ + 1) + k];
  }

  std::uint32_t n_ = 0;
  std::uint32_t k_ = 0;
  std::uint64_t count_ = 0;
  std::vector<std::uint64_t> table_;  // (n+1) x (k+1), saturating
};

}  // namespace dpc
