#pragma once

// Cache states: c-subsets of a catalog of N_f equal-length contents.
//
// Content ids are 1-based everywhere in the public interface. State indices
// are 0-based positions in lexicographic order of the sorted id lists.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "dpc/combinatorics.hpp"

namespace dpc {

using ContentId = std::uint32_t;
using StateIndex = std::size_t;

inline constexpr std::uint64_t kDefaultStateCap = 1'000'000;

/// Average request probabilities phi_k over a time window.
class ContentCatalog {
 public:
  explicit ContentCatalog(std::vector<double> popularity);

  /// phi_k proportional to k^-s, k = 1..n.
  static ContentCatalog zipf(std::size_t n_contents, double s);

  std::size_t size() const { return phi_.size(); }
  double phi(ContentId k) const { return phi_[k - 1]; }
  std::span<const double> popularity() const { return phi_; }

 private:
  std::vector<double> phi_;
};

/// A set of cached contents, kept as a strictly increasing id list.
struct CacheState {
  std::vector<ContentId> contents;

  bool contains(ContentId k) const;
  std::size_t size() const { return contents.size(); }
  friend bool operator==(const CacheState&, const CacheState&) = default;
  friend auto operator<=>(const CacheState& a, const CacheState& b) { return a.contents <=> b.contents; }
};

/// Number of contents two states differ in (half the symmetric difference).
std::size_t state_distance(std::span<const ContentId> a, std::span<const ContentId> b);

/// The full universe of C(N_f, c) cache states in lexicographic order.
class StateSpace {
 public:
  /// Throws StateSpaceTooLarge when C(N_f, c) exceeds cap.
  static StateSpace enumerate(std::size_t n_contents, std::size_t cache_size,
                              std::uint64_t cap = kDefaultStateCap);

  std::size_t n_contents() const { return indexer_.n(); }
  std::size_t cache_size() const { return indexer_.k(); }
  std::size_t size() const { return static_cast<std::size_t>(indexer_.count()); }

  CacheState state(StateIndex m) const;
  StateIndex index_of(std::span<const ContentId> contents) const;
  StateIndex index_of(const CacheState& s) const { return index_of(s.contents); }

  /// H_m: all states differing from m in exactly one content, ascending.
  std::vector<StateIndex> neighbors(StateIndex m) const;
  /// H_m^k: states reachable from m by inserting k in place of one cached content.
  std::vector<StateIndex> neighbors_by_content(StateIndex m, ContentId k) const;

 private:
  explicit StateSpace(CombinationIndexer indexer) : indexer_(std::move(indexer)) {}
  void check_index(StateIndex m) const;

  CombinationIndexer indexer_;
};

/// The N_f x n 0-1 matrix S whose column m is the indicator of state m.
///
/// Kept matrix-free; dense() materializes it for small spaces.
class StateMatrix {
 public:
  explicit StateMatrix(StateSpace space) : space_(std::move(space)) {}

  const StateSpace& space() const { return space_; }
  std::size_t rows() const { return space_.n_contents(); }
  std::size_t cols() const { return space_.size(); }

  bool operator()(ContentId k, StateIndex m) const { return space_.state(m).contains(k); }

  /// S * eta, length N_f.
  std::vector<double> multiply(std::span<const double> eta) const;
  /// S^T * y, length n.
  std::vector<double> transpose_multiply(std::span<const double> y) const;

  std::vector<std::uint64_t> row_sums() const;
  std::vector<std::uint64_t> column_sums() const;

  Eigen::MatrixXd dense() const;

 private:
  StateSpace space_;
};

StateMatrix state_matrix(const StateSpace& space);

/// An explicit list of cache states with their neighbor graph.
///
/// This is what the replacement chain runs on: either the support of a
/// distribution over a full StateSpace, or a truncated list of states.
class StateSet {
 public:
  StateSet() = default;
  StateSet(std::size_t n_contents, std::size_t cache_size, std::vector<CacheState> states);

  /// States of `space` with eta > 0, in canonical order.
  static StateSet support_of(const StateSpace& space, std::span<const double> eta);
  /// All states of a space.
  static StateSet all_of(const StateSpace& space);

  std::size_t n_contents() const { return n_contents_; }
  std::size_t cache_size() const { return cache_size_; }
  std::size_t size() const { return states_.size(); }
  const CacheState& state(std::size_t i) const { return states_[i]; }
  const std::vector<CacheState>& states() const { return states_; }

  /// Indices in the original StateSpace, when the set came from one.
  const std::optional<std::vector<StateIndex>>& canonical_indices() const { return canonical_; }

  std::optional<std::size_t> find(std::span<const ContentId> contents) const;
  /// Neighbors of state i within this set, ascending.
  std::span<const std::size_t> neighbors(std::size_t i) const { return neighbors_[i]; }
  bool are_neighbors(std::size_t i, std::size_t j) const;
  /// Members of this set reachable from i by inserting k; subset of H_i^k.
  std::vector<std::size_t> neighbors_by_content(std::size_t i, ContentId k) const;
  /// For neighbors i -> j: the content in j that is not in i.
  ContentId linking_content(std::size_t from, std::size_t to) const;
  /// Contents cached by at least one member, ascending.
  std::vector<ContentId> content_union() const;

 private:
  struct VectorHash {
    std::size_t operator()(const std::vector<ContentId>& v) const noexcept;
  };
  void build_neighbors();

  std::size_t n_contents_ = 0;
  std::size_t cache_size_ = 0;
  std::vector<CacheState> states_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::unordered_map<std::vector<ContentId>, std::size_t, VectorHash> lookup_;
  std::optional<std::vector<StateIndex>> canonical_;
};

/// Options for shrinking the state space before building a chain.
struct TruncationConfig {
  bool drop_zero_prob = true;   // remove contents with p_k = 0
  bool pin_certain = true;      // fix contents with p_k = 1 in every state
  std::optional<std::size_t> top_k_states;  // keep K states with largest sum of phi
  double tolerance = 1e-12;     // p_k within this of 0 or 1 counts as 0 or 1
};

struct Truncation {
  std::vector<ContentId> pinned;      // p_k = 1, in every kept state
  std::vector<ContentId> dropped;     // p_k = 0, in no kept state
  std::vector<ContentId> fractional;  // reduced id i+1 maps to fractional[i]
  std::size_t residual_cache_size = 0;
  /// C(N_e, c') over reduced ids; absent with top-K or when c' = 0.
  std::optional<StateSpace> reduced_space;
  /// Kept states in original ids, lexicographic order. Index i is the
  /// reduced index; with reduced_space present it equals the reduced rank.
  StateSet states;

  /// Map a state of reduced_space back to original content ids.
  CacheState lift(const CacheState& reduced) const;
  /// Restrict a full-catalog vector (p or phi) to the fractional contents.
  std::vector<double> restrict(std::span<const double> full) const;
};

/// Apply content-level and state-level reductions. `target` holds p_k for the
/// full catalog and sums to the cache size.
Truncation truncate(const ContentCatalog& catalog, std::span<const double> target,
                    const TruncationConfig& config, std::uint64_t cap = kDefaultStateCap);

/// The K c-subsets of `candidates` with the largest sum of phi, exactly.
/// Ties are broken by lexicographic order of the sorted id lists. Returned
/// in lexicographic order.
std::vector<CacheState> top_states_by_popularity(const ContentCatalog& catalog,
                                                 std::span<const ContentId> candidates,
                                                 std::size_t cache_size, std::size_t k,
                                                 std::span<const ContentId> always_cached = {});

/// Sum of phi over the contents of a state.
double state_popularity(const ContentCatalog& catalog, const CacheState& s);

}  // namespace dpc
