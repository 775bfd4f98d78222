#pragma once

// Mixing behavior of a transition matrix: second-largest eigenvalue modulus
// and distance-to-target trajectories.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dpc/transition_matrix.hpp"

namespace dpc {

inline constexpr std::size_t kDenseSpectrumLimit = 5000;

/// Second-largest eigenvalue modulus. With `eta` given and Theta reversible
/// with respect to it, a symmetric eigensolver is used. nullopt when the
/// matrix is larger than kDenseSpectrumLimit; 0 for a single state.
std::optional<double> slem(const TransitionMatrix& theta, std::span<const double> eta = {});

struct Evolution {
  /// First t with ||Theta^t eta0 - eta*||_2 < threshold, if reached by t_max.
  std::optional<std::size_t> iterations;
  /// Distances for t = 0, 1, ... up to the stopping step.
  std::vector<double> trajectory;
};

Evolution distribution_evolution(const TransitionMatrix& theta, std::span<const double> eta0,
                                 std::span<const double> eta_star, std::size_t t_max,
                                 double threshold, bool keep_trajectory = true);

struct MixingReport {
  std::optional<double> slem;
  double threshold = 0.0;
  std::size_t trials = 0;
  std::size_t converged = 0;
  /// Per-trial iteration counts; trials that did not converge hold t_max.
  std::vector<std::size_t> iterations;
  double mean = 0.0;
  double median = 0.0;
  std::size_t min = 0;
  std::size_t max = 0;
};

/// Random initial distributions are uniform on the simplex.
MixingReport mixing_report(const TransitionMatrix& theta, std::span<const double> eta_star,
                           std::size_t n_trials, double threshold, std::uint64_t seed,
                           std::size_t t_max = 1'000'000);

}  // namespace dpc
