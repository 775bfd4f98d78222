#include "dpc/combinatorics.hpp"

#include <limits>

namespace dpc {

namespace {
__extension__ using u128 = unsigned __int128;
}  // namespace

std::optional<std::uint64_t> binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  u128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // acc * (n - k + i) / i stays integral at every step
    acc = acc * (n - k + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) return std::nullopt;
  }
  return static_cast<std::uint64_t>(acc);
}

CombinationIndexer::CombinationIndexer(std::uint32_t n, std::uint32_t k)
    : n_(n), k_(k), table_(static_cast<std::size_t>(n + 1) * (k + 1), 0) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  for (std::uint32_t i = 0; i <= n; ++i) {
    table_[static_cast<std::size_t>(i) * (k + 1)] = 1;
    for (std::uint32_t j = 1; j <= k && j <= i; ++j) {
      const auto a = table_[static_cast<std::size_t>(i - 1) * (k + 1) + j - 1];
      const auto b = j <= i - 1 ? table_[static_cast<std::size_t>(i - 1) * (k + 1) + j] : 0;
      table_[static_cast<std::size_t>(i) * (k + 1) + j] = (a > kMax - b) ? kMax : a + b;
    }
  }
  count_ = choose(n, k);
}

std::uint64_t CombinationIndexer::rank(std::span<const std::uint32_t> ids) const {
  std::uint64_t r = 0;
  std::uint32_t prev = 0;
  for (std::uint32_t i = 0; i < k_; ++i) {
    const std::uint32_t remaining = k_ - i - 1;
    for (std::uint32_t j = prev + 1; j < ids[i]; ++j) r += choose(n_ - j, remaining);
    prev = ids[i];
  }
  return r;
}

void CombinationIndexer::unrank(std::uint64_t rank, std::span<std::uint32_t> out) const {
  std::uint32_t id = 1;
  for (std::uint32_t i = 0; i < k_; ++i) {
    const std::uint32_t remaining = k_ - i - 1;
    while (true) {
      const auto block = choose(n_ - id, remaining);
      if (rank < block) break;
      rank -= block;
      ++id;
    }
    out[i] = id++;
  }
}

}  // namespace dpc
