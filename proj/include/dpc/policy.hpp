#pragma once

// Replacement Markov chain: from a target state distribution eta* and the
// content popularity phi to a column-stochastic Theta with Theta eta* = eta*,
// and from Theta to per-request replacement probabilities tau.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpc/placement.hpp"
#include "dpc/state_space.hpp"
#include "dpc/transition_matrix.hpp"

namespace dpc {

/// omega_{k,m',m} = scale / c for every k, m', m. Any scale in (0, 1] keeps
/// the per-(m, k) sum of limits at most one.
struct AcceptanceLimits {
  double scale = 1.0;

  double operator()(ContentId /*k*/, std::size_t /*to*/, std::size_t /*from*/,
                    std::size_t cache_size) const {
    return scale / static_cast<double>(cache_size);
  }
};

/// Everything the chain construction reads. States are the support of eta*.
struct ChainInput {
  StateSet states;
  std::vector<double> eta;  // eta* per state of `states`, all positive
  std::vector<double> phi;  // per content, length n_contents
  AcceptanceLimits omega;

  /// Restrict (space, eta) to its support.
  static ChainInput from_distribution(const StateSpace& space, const StateDistribution& eta,
                                      const ContentCatalog& catalog, AcceptanceLimits omega = {});
  /// Drops zero-mass entries of `eta` together with their states.
  static ChainInput from_states(const StateSet& states, std::span<const double> eta,
                                const ContentCatalog& catalog, AcceptanceLimits omega = {});

  std::size_t size() const { return states.size(); }
  double phi_of(ContentId k) const { return phi[k - 1]; }
  /// Throws InvalidArgument on shape or probability violations.
  void validate() const;
};

/// States by non-increasing eta, ties by index ascending.
struct SortedOrder {
  std::vector<std::size_t> order;     // position -> state
  std::vector<std::size_t> position;  // state -> position
  std::vector<double> values;         // eta along `order`
};

SortedOrder sort_by_eta(std::span<const double> eta);

/// V(m): the neighbor of m closest above it in the sorted order.
/// X(m): the neighbor of m closest below it. Only states with active[i] set
/// are considered; an empty mask means all states.
std::optional<std::size_t> v_of(const StateSet& states, const SortedOrder& sorted, std::size_t m,
                                std::span<const char> active = {});
std::optional<std::size_t> x_of(const StateSet& states, const SortedOrder& sorted, std::size_t m,
                                std::span<const char> active = {});

struct Sequence {
  std::vector<std::size_t> states;   // non-increasing eta, consecutive states are neighbors
  std::optional<std::size_t> branch;  // B(l), neighbor of states.front()
  std::optional<std::size_t> merge;   // M(l), neighbor of states.back()
};

struct SequenceDecomposition {
  SortedOrder sorted;
  /// In placement order; sequences.front() has neither branch nor merge.
  std::vector<Sequence> sequences;
  /// States flagged as potential connection points, ascending.
  std::vector<std::size_t> connection_points;
  /// Number of times a sequence had to be split to connect it.
  std::size_t splits = 0;
};

/// One pass of the sequence extraction over `input` (states in sorted order).
/// Returns the kept sequence; removed states are appended to `rest`, and
/// connection points are flagged in `marked`.
std::vector<std::size_t> extract_sequence(const StateSet& states, const SortedOrder& sorted,
                                          std::span<const std::size_t> input,
                                          std::vector<std::size_t>& rest,
                                          std::vector<char>& marked);

/// Runs the extraction until every state is placed, then picks branch and
/// merge points. Throws DisconnectedSupport when the neighbor graph of the
/// states is not connected.
SequenceDecomposition build_sequences(const ChainInput& input);

/// Links m -> m' and m' -> m while keeping Theta eta* = eta*. Returns delta
/// = Theta(m', m). Throws InfeasibleLimits if a diagonal would go negative.
double basic_update(TransitionMatrix& theta, const ChainInput& input, std::size_t m,
                    std::size_t m_prime);

/// Basic chain: identity, then connection links, then within-sequence links
/// from tail to head.
TransitionMatrix generate_theta(const ChainInput& input, const SequenceDecomposition& dec);

/// Adds a link for every unlinked neighbor pair, in sorted order.
TransitionMatrix refine_theta(TransitionMatrix theta, const ChainInput& input,
                              const SortedOrder& sorted);

struct ReplacementMove {
  std::size_t to;
  ContentId content;  // the requested content that triggers the move
  double tau;
};

/// tau_{m',m}: probability of moving m -> m' when the linking content is
/// requested in state m.
class ReplacementPolicy {
 public:
  ReplacementPolicy() = default;
  ReplacementPolicy(StateSet states, std::vector<std::vector<ReplacementMove>> moves);

  const StateSet& states() const { return states_; }
  std::size_t size() const { return states_.size(); }
  /// Sorted by (content, to).
  std::span<const ReplacementMove> moves(std::size_t m) const { return moves_[m]; }
  std::span<const ReplacementMove> moves(std::size_t m, ContentId k) const;
  double tau(std::size_t to, std::size_t from) const;
  /// Probability of keeping the state when k is requested in m.
  double residual(std::size_t m, ContentId k) const;

 private:
  StateSet states_;
  std::vector<std::vector<ReplacementMove>> moves_;
};

/// Throws Error when a nonzero off-diagonal entry is linked by a content with
/// zero popularity.
ReplacementPolicy derive_tau(const TransitionMatrix& theta, const ChainInput& input);

struct CompiledChain {
  SequenceDecomposition decomposition;
  TransitionMatrix basic;    // generate_theta
  TransitionMatrix theta;    // refined, or equal to basic
  ReplacementPolicy policy;  // from theta
};

CompiledChain compile_chain(const ChainInput& input, bool refine = true);

struct Theorem1Report {
  // (a) stochastic
  bool stochastic = false;
  double max_column_error = 0.0;
  double min_entry = 0.0;
  double max_entry = 0.0;
  bool neighbor_structure = false;  // off-diagonals only between neighbors
  // (b) tau bounds
  bool tau_bounds = false;
  double max_tau = 0.0;
  double max_tau_sum = 0.0;  // max over (m, k) of sum of tau
  double max_offdiag_over_phi = 0.0;
  // (c) fixed point
  bool fixed_point = false;
  double fixed_point_error = 0.0;
  // (d) ergodicity
  bool irreducible = false;
  bool aperiodic = false;
  std::size_t period = 0;
  // (e) convergence
  bool converges = false;
  double limit_tv = 0.0;

  bool all() const {
    return stochastic && neighbor_structure && tau_bounds && fixed_point && irreducible &&
           aperiodic && converges;
  }
};

Theorem1Report verify_theorem1(const TransitionMatrix& theta, const ChainInput& input);

/// Strongly connected components of the digraph of nonzero off-diagonals.
std::size_t strongly_connected_components(const TransitionMatrix& theta);
/// Period of an irreducible chain (gcd of cycle lengths); 0 if reducible.
std::size_t chain_period(const TransitionMatrix& theta);

/// Theta_k for k = 1..N_f (index k - 1).
std::vector<TransitionMatrix> conditional_matrices(const ReplacementPolicy& policy);
std::vector<TransitionMatrix> conditional_matrices(const TransitionMatrix& theta,
                                                   const ChainInput& input);

/// sum_k phi_k Theta_k.
TransitionMatrix mix_conditionals(std::span<const TransitionMatrix> conditionals,
                                  std::span<const double> phi);

/// (1/N_r) sum_q sum_k phi^(q)_k Theta_k.
TransitionMatrix average_theta(std::span<const TransitionMatrix> conditionals,
                               std::span<const std::vector<double>> popularity_sequence);

}  // namespace dpc
