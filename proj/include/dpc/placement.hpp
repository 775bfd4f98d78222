#pragma once

// Static probabilistic placement: from per-content caching probabilities p
// to a distribution eta over cache states with S * eta = p.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dpc/state_space.hpp"

namespace dpc {

namespace tolerance {
inline constexpr double kSimplex = 1e-12;   // sums to one, fixed points, column sums
inline constexpr double kResidual = 1e-9;   // linear-system residuals
}  // namespace tolerance

/// Per-content caching probabilities p_k, summing to the cache size.
struct PlacementTarget {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  /// Round(sum p). Throws when the target is invalid.
  std::size_t cache_size() const;
  /// Throws InvalidArgument unless 0 <= p_k <= 1 and sum p is an integer c >= 1.
  void validate() const;

  /// p_k = min(1, lambda * phi_k) with lambda chosen so that sum p = c.
  static PlacementTarget capped_proportional(const ContentCatalog& catalog, std::size_t cache_size);
};

/// Probabilities over the states of a StateSpace (or a StateSet).
struct StateDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  /// Indices with positive mass, ascending.
  std::vector<StateIndex> support() const;
};

/// c unit rows filled with one block of length p_k per content, wrapping
/// into the next row when a row runs out.
struct BlockLayout {
  struct Block {
    ContentId content;
    double start;   // position on the concatenated axis [0, c)
    double length;  // p_k
  };
  std::size_t rows = 0;
  std::vector<Block> blocks;
  std::vector<double> breakpoints;  // sorted distinct cut positions in [0, 1)

  /// Contents crossed by the vertical line at x in [0, 1), one per row, sorted.
  std::vector<ContentId> crossed(double x) const;
};

/// Contents by non-increasing p, ties by id.
std::vector<ContentId> default_ordering(const PlacementTarget& target);

BlockLayout block_layout(const PlacementTarget& target, std::span<const ContentId> ordering);

/// States induced by the layout with their probabilities (interval lengths),
/// in lexicographic order. Works for any catalog size.
std::vector<std::pair<CacheState, double>> block_filling_states(const BlockLayout& layout);

/// Dense eta over `space` from the block-filling heuristic. An empty
/// ordering means default_ordering(target).
StateDistribution block_filling_eta(const PlacementTarget& target, const StateSpace& space,
                                    std::span<const ContentId> ordering = {});

/// S^T (S S^T)^-1 p, computed in closed form (S S^T = a I + b J).
StateDistribution min_norm_eta(const PlacementTarget& target, const StateSpace& space);

/// Moves eta along null-space directions of its support columns until those
/// columns are linearly independent. Keeps S * eta and eta >= 0.
StateDistribution reduce_to_vertex(const StateDistribution& eta, const PlacementTarget& target,
                                   const StateSpace& space);

/// A state distribution implementing the target. Returns the minimum-norm
/// solution when it is non-negative, otherwise a basic feasible solution
/// (at most N_f support states) reached from the block-filling solution.
StateDistribution solve_eta(const PlacementTarget& target, const StateSpace& space);

/// Inverse-CDF draw over eta in index order; u in [0, 1).
StateIndex sample_state(const StateDistribution& eta, double u);

struct EtaReport {
  double residual_inf = 0.0;  // ||S eta - p||_inf
  double sum_error = 0.0;     // |sum eta - 1|
  double min_entry = 0.0;
  double max_entry = 0.0;
  std::size_t simplex_violations = 0;  // entries outside [0, 1] by more than kSimplex
  /// States with eta > 0 that omit a p = 1 content or hold a p = 0 content.
  std::vector<StateIndex> support_violations;

  bool ok(double residual_tol = tolerance::kResidual, double simplex_tol = tolerance::kSimplex) const {
    return residual_inf <= residual_tol && sum_error <= simplex_tol && simplex_violations == 0 &&
           support_violations.empty();
  }
};

EtaReport validate_eta(const StateDistribution& eta, const PlacementTarget& target,
                       const StateSpace& space);

/// eta_l proportional to the summed popularity of the contents of state l.
StateDistribution state_popularity_eta(const ContentCatalog& catalog, const StateSet& states);

}  // namespace dpc
