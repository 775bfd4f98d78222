#include "dpc/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "dpc/errors.hpp"

namespace dpc {

namespace {

void check_space(const PlacementTarget& target, const StateSpace& space) {
  target.validate();
  if (target.size() != space.n_contents() || target.cache_size() != space.cache_size()) {
    throw InvalidArgument("placement target does not match the state space dimensions");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// PlacementTarget / StateDistribution

std::size_t PlacementTarget::cache_size() const {
  validate();
  return static_cast<std::size_t>(std::llround(std::accumulate(probs.begin(), probs.end(), 0.0)));
}

void PlacementTarget::validate() const {
  if (probs.empty()) throw InvalidArgument("placement target is empty");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("caching probabilities must lie in [0, 1]");
    total += p;
  }
  const double c = std::round(total);
  if (c < 1.0 || std::abs(total - c) > tolerance::kResidual) {
    std::ostringstream os;
    os << "caching probabilities must sum to an integer cache size (got " << total << ")";
    throw InvalidArgument(os.str());
  }
}

PlacementTarget PlacementTarget::capped_proportional(const ContentCatalog& catalog,
                                                     std::size_t cache_size) {
  const auto phi = catalog.popularity();
  std::vector<ContentId> order(phi.size());
  std::iota(order.begin(), order.end(), 1u);
  std::stable_sort(order.begin(), order.end(),
                   [&](ContentId a, ContentId b) { return phi[a - 1] > phi[b - 1]; });
  const auto positive = static_cast<std::size_t>(
      std::count_if(phi.begin(), phi.end(), [](double v) { return v > 0.0; }));
  if (cache_size < 1 || cache_size > positive) {
    throw InvalidArgument("cache size must lie between 1 and the number of requested contents");
  }

  std::vector<double> tail(order.size() + 1, 0.0);
  for (std::size_t i = order.size(); i-- > 0;) tail[i] = tail[i + 1] + phi[order[i] - 1];

  PlacementTarget t{std::vector<double>(phi.size(), 0.0)};
  for (std::size_t capped = 0; capped <= cache_size; ++capped) {
    const double lambda =
        capped == cache_size ? 0.0 : static_cast<double>(cache_size - capped) / tail[capped];
    if (capped == cache_size || lambda * phi[order[capped] - 1] <= 1.0) {
      for (std::size_t i = 0; i < order.size(); ++i) {
        t.probs[order[i] - 1] = i < capped ? 1.0 : std::min(1.0, lambda * phi[order[i] - 1]);
      }
      return t;
    }
  }
  throw InvariantViolation("capped proportional allocation did not converge");
}

std::vector<StateIndex> StateDistribution::support() const {
  std::vector<StateIndex> s;
  for (StateIndex l = 0; l < probs.size(); ++l) {
    if (probs[l] > 0.0) s.push_back(l);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Block filling

std::vector<ContentId> default_ordering(const PlacementTarget& target) {
  std::vector<ContentId> order(target.size());
  std::iota(order.begin(), order.end(), 1u);
  std::stable_sort(order.begin(), order.end(), [&](ContentId a, ContentId b) {
    return target.probs[a - 1] > target.probs[b - 1];
  });
  return order;
}

BlockLayout block_layout(const PlacementTarget& target, std::span<const ContentId> ordering) {
  const std::size_t c = target.cache_size();
  std::vector<ContentId> order(ordering.begin(), ordering.end());
  if (order.empty()) order = default_ordering(target);
  {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<ContentId> expected(target.size());
    std::iota(expected.begin(), expected.end(), 1u);
    if (sorted != expected) throw InvalidArgument("ordering must be a permutation of the contents");
  }

  BlockLayout layout;
  layout.rows = c;
  double pos = 0.0;
  std::vector<double> cuts{0.0};
  auto add_cut = [&](double x) {
    double frac = x - std::floor(x);
    if (frac > 1.0 - tolerance::kResidual) frac = 0.0;
    cuts.push_back(frac);
  };
  for (ContentId k : order) {
    const double len = target.probs[k - 1];
    if (len <= 0.0) continue;
    layout.blocks.push_back({k, pos, len});
    pos += len;
    add_cut(pos);
  }
  std::sort(cuts.begin(), cuts.end());
  for (double x : cuts) {
    if (layout.breakpoints.empty() || x - layout.breakpoints.back() > tolerance::kSimplex) {
      layout.breakpoints.push_back(x);
    }
  }
  return layout;
}

std::vector<ContentId> BlockLayout::crossed(double x) const {
  std::vector<ContentId> out;
  out.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double at = static_cast<double>(r) + x;
    auto it = std::upper_bound(blocks.begin(), blocks.end(), at,
                               [](double v, const Block& b) { return v < b.start; });
    if (it == blocks.begin()) throw InvariantViolation("vertical line misses the first block");
    out.push_back(std::prev(it)->content);
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw InvariantViolation("a content is crossed twice by one vertical line");
  }
  return out;
}

std::vector<std::pair<CacheState, double>> block_filling_states(const BlockLayout& layout) {
  std::map<CacheState, double> acc;
  const auto& bp = layout.breakpoints;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    const double lo = bp[i];
    const double hi = i + 1 < bp.size() ? bp[i + 1] : 1.0;
    if (hi - lo <= 0.0) continue;
    acc[CacheState{layout.crossed(0.5 * (lo + hi))}] += hi - lo;
  }
  return {acc.begin(), acc.end()};
}

StateDistribution block_filling_eta(const PlacementTarget& target, const StateSpace& space,
                                    std::span<const ContentId> ordering) {
  check_space(target, space);
  StateDistribution eta{std::vector<double>(space.size(), 0.0)};
  for (const auto& [state, mass] : block_filling_states(block_layout(target, ordering))) {
    eta.probs[space.index_of(state)] += mass;
  }
  return eta;
}

// ---------------------------------------------------------------------------
// Solvers

StateDistribution min_norm_eta(const PlacementTarget& target, const StateSpace& space) {
  check_space(target, space);
  const std::size_t n_f = space.n_contents();
  const std::size_t c = space.cache_size();
  if (c == n_f) return StateDistribution{{1.0}};

  // S S^T = a I + b J with a = C(N-2, c-1), b = C(N-2, c-2)
  const double a = static_cast<double>(binomial(n_f - 2, c - 1).value());
  const double b = c >= 2 ? static_cast<double>(binomial(n_f - 2, c - 2).value()) : 0.0;
  const double total = std::accumulate(target.probs.begin(), target.probs.end(), 0.0);
  const double shift = b * total / (a + static_cast<double>(n_f) * b);
  std::vector<double> y(n_f);
  for (std::size_t k = 0; k < n_f; ++k) y[k] = (target.probs[k] - shift) / a;
  return StateDistribution{StateMatrix(space).transpose_multiply(y)};
}

StateDistribution reduce_to_vertex(const StateDistribution& eta, const PlacementTarget& target,
                                   const StateSpace& space) {
  check_space(target, space);
  std::vector<StateIndex> support = eta.support();
  std::vector<double> values;
  for (auto l : support) values.push_back(eta.probs[l]);

  const auto rows = static_cast<Eigen::Index>(space.n_contents());
  auto columns = [&]() {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j) {
      for (ContentId k : space.state(support[j]).contents) a(k - 1, static_cast<Eigen::Index>(j)) = 1.0;
    }
    return a;
  };

  while (true) {
    const Eigen::MatrixXd a = columns();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    if (lu.rank() == static_cast<Eigen::Index>(support.size())) break;
    const Eigen::VectorXd v = lu.kernel().col(0);

    // step along -v (or v) until the first entry hits zero
    double best_t = std::numeric_limits<double>::infinity();
    std::size_t hit = 0;
    double sign = 1.0;
    for (double dir : {1.0, -1.0}) {
      for (std::size_t j = 0; j < support.size(); ++j) {
        const double vj = dir * v(static_cast<Eigen::Index>(j));
        if (vj > 1e-14) {
          const double t = values[j] / vj;
          if (t < best_t) {
            best_t = t;
            hit = j;
            sign = dir;
          }
        }
      }
    }
    for (std::size_t j = 0; j < support.size(); ++j) {
      values[j] -= best_t * sign * v(static_cast<Eigen::Index>(j));
    }
    values[hit] = 0.0;
    std::vector<StateIndex> next_support;
    std::vector<double> next_values;
    for (std::size_t j = 0; j < support.size(); ++j) {
      if (values[j] > tolerance::kSimplex) {
        next_support.push_back(support[j]);
        next_values.push_back(values[j]);
      }
    }
    support = std::move(next_support);
    values = std::move(next_values);
  }

  // re-solve on the independent support to shed accumulated rounding
  const Eigen::MatrixXd a = columns();
  Eigen::VectorXd p(rows);
  for (Eigen::Index k = 0; k < rows; ++k) p(k) = target.probs[static_cast<std::size_t>(k)];
  const Eigen::VectorXd exact = a.colPivHouseholderQr().solve(p);

  StateDistribution out{std::vector<double>(space.size(), 0.0)};
  for (std::size_t j = 0; j < support.size(); ++j) {
    out.probs[support[j]] = std::clamp(exact(static_cast<Eigen::Index>(j)), 0.0, 1.0);
  }
  return out;
}

StateDistribution solve_eta(const PlacementTarget& target, const StateSpace& space) {
  StateDistribution eta = min_norm_eta(target, space);
  const double lowest = *std::min_element(eta.probs.begin(), eta.probs.end());
  if (lowest >= -tolerance::kSimplex) {
    for (double& v : eta.probs) {
      if (std::abs(v) <= tolerance::kSimplex) v = 0.0;
    }
    return eta;
  }
  StateDistribution vertex = reduce_to_vertex(block_filling_eta(target, space), target, space);
  if (!validate_eta(vertex, target, space).ok()) {
    throw InvariantViolation("no valid state distribution found for a valid placement target");
  }
  return vertex;
}

StateIndex sample_state(const StateDistribution& eta, double u) {
  double cum = 0.0;
  std::optional<StateIndex> last;
  for (StateIndex l = 0; l < eta.probs.size(); ++l) {
    if (eta.probs[l] <= 0.0) continue;
    cum += eta.probs[l];
    last = l;
    if (u < cum) return l;
  }
  if (!last) throw InvalidArgument("cannot sample from an empty distribution");
  return *last;
}

// ---------------------------------------------------------------------------
// Validation

EtaReport validate_eta(const StateDistribution& eta, const PlacementTarget& target,
                       const StateSpace& space) {
  if (eta.size() != space.size() || target.size() != space.n_contents()) {
    throw InvalidArgument("shapes of eta, target and state space are inconsistent");
  }
  EtaReport r;
  const auto p = StateMatrix(space).multiply(eta.probs);
  for (std::size_t k = 0; k < p.size(); ++k) {
    r.residual_inf = std::max(r.residual_inf, std::abs(p[k] - target.probs[k]));
  }
  r.sum_error = std::abs(std::accumulate(eta.probs.begin(), eta.probs.end(), 0.0) - 1.0);
  r.min_entry = *std::min_element(eta.probs.begin(), eta.probs.end());
  r.max_entry = *std::max_element(eta.probs.begin(), eta.probs.end());
  for (StateIndex l = 0; l < eta.size(); ++l) {
    const double v = eta.probs[l];
    if (v < -tolerance::kSimplex || v > 1.0 + tolerance::kSimplex) ++r.simplex_violations;
    if (v <= tolerance::kSimplex) continue;
    const CacheState s = space.state(l);
    for (ContentId k = 1; k <= space.n_contents(); ++k) {
      const double pk = target.probs[k - 1];
      const bool cached = s.contains(k);
      if ((pk >= 1.0 - tolerance::kSimplex && !cached) || (pk <= tolerance::kSimplex && cached)) {
        r.support_violations.push_back(l);
        break;
      }
    }
  }
  return r;
}

StateDistribution state_popularity_eta(const ContentCatalog& catalog, const StateSet& states) {
  StateDistribution eta{std::vector<double>(states.size())};
  double total = 0.0;
  for (std::size_t l = 0; l < states.size(); ++l) {
    eta.probs[l] = state_popularity(catalog, states.state(l));
    total += eta.probs[l];
  }
  if (!(total > 0.0)) throw InvalidArgument("states carry no request probability");
  for (double& v : eta.probs) v /= total;
  return eta;
}

}  // namespace dpc
