#include "dpc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "dpc/errors.hpp"

namespace dpc {

namespace {

constexpr double kSnap = 1e-15;

double snap(double x) {
  if (std::abs(x) < kSnap) return 0.0;
  if (std::abs(x - 1.0) < kSnap) return 1.0;
  return x;
}

bool is_active(std::span<const char> active, std::size_t i) { return active.empty() || active[i]; }

std::string describe_states(const StateSet& states, std::span<const std::size_t> ids) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ", ";
    if (i == 8) {
      os << "... " << ids.size() - 8 << " more";
      break;
    }
    const auto& canon = states.canonical_indices();
    os << (canon ? (*canon)[ids[i]] : ids[i]);
  }
  os << "}";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// ChainInput

ChainInput ChainInput::from_distribution(const StateSpace& space, const StateDistribution& eta,
                                         const ContentCatalog& catalog, AcceptanceLimits omega) {
  if (eta.size() != space.size()) throw InvalidArgument("eta length must equal the number of states");
  ChainInput in;
  in.states = StateSet::support_of(space, eta.probs);
  for (double v : eta.probs)
    if (v > 0.0) in.eta.push_back(v);
  in.phi.assign(catalog.popularity().begin(), catalog.popularity().end());
  in.omega = omega;
  in.validate();
  return in;
}

ChainInput ChainInput::from_states(const StateSet& states, std::span<const double> eta,
                                   const ContentCatalog& catalog, AcceptanceLimits omega) {
  if (eta.size() != states.size()) throw InvalidArgument("eta length must equal the number of states");
  std::vector<CacheState> kept;
  ChainInput in;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (eta[i] > 0.0) {
      kept.push_back(states.state(i));
      in.eta.push_back(eta[i]);
    }
  }
  in.states = StateSet(states.n_contents(), states.cache_size(), std::move(kept));
  in.phi.assign(catalog.popularity().begin(), catalog.popularity().end());
  in.omega = omega;
  in.validate();
  return in;
}

void ChainInput::validate() const {
  if (states.size() == 0) throw InvalidArgument("empty support");
  if (eta.size() != states.size()) throw InvalidArgument("eta length must equal the number of states");
  if (phi.size() != states.n_contents()) throw InvalidArgument("phi length must equal the catalog size");
  double sum = 0.0;
  for (double v : eta) {
    if (!(v > 0.0) || v > 1.0 + tolerance::kSimplex)
      throw InvalidArgument("eta entries on the support must lie in (0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tolerance::kResidual) throw InvalidArgument("eta must sum to 1");
  for (double v : phi)
    if (!(v >= 0.0)) throw InvalidArgument("phi entries must be non-negative");
  if (!(omega.scale > 0.0) || omega.scale > 1.0)
    throw InvalidArgument("acceptance limit scale must lie in (0, 1]");
}

// ---------------------------------------------------------------------------
// Ordering and sequences

SortedOrder sort_by_eta(std::span<const double> eta) {
  if (eta.empty()) throw InvalidArgument("empty support");
  SortedOrder s;
  s.order.resize(eta.size());
  std::iota(s.order.begin(), s.order.end(), std::size_t{0});
  std::stable_sort(s.order.begin(), s.order.end(),
                   [&](std::size_t a, std::size_t b) { return eta[a] > eta[b]; });
  s.position.resize(eta.size());
  s.values.resize(eta.size());
  for (std::size_t p = 0; p < s.order.size(); ++p) {
    s.position[s.order[p]] = p;
    s.values[p] = eta[s.order[p]];
  }
  return s;
}

std::optional<std::size_t> v_of(const StateSet& states, const SortedOrder& sorted, std::size_t m,
                                std::span<const char> active) {
  std::optional<std::size_t> best;
  const std::size_t pm = sorted.position[m];
  for (std::size_t j : states.neighbors(m)) {
    if (!is_active(active, j) || sorted.position[j] > pm) continue;
    if (!best || sorted.position[j] > sorted.position[*best]) best = j;
  }
  return best;
}

std::optional<std::size_t> x_of(const StateSet& states, const SortedOrder& sorted, std::size_t m,
                                std::span<const char> active) {
  std::optional<std::size_t> best;
  const std::size_t pm = sorted.position[m];
  for (std::size_t j : states.neighbors(m)) {
    if (!is_active(active, j) || sorted.position[j] < pm) continue;
    if (!best || sorted.position[j] < sorted.position[*best]) best = j;
  }
  return best;
}

std::vector<std::size_t> extract_sequence(const StateSet& states, const SortedOrder& sorted,
                                          std::span<const std::size_t> input,
                                          std::vector<std::size_t>& rest,
                                          std::vector<char>& marked) {
  std::vector<std::size_t> kept;
  if (input.empty()) return kept;
  std::vector<char> active(states.size(), 0);
  for (std::size_t m : input) active[m] = 1;
  marked.resize(states.size(), 0);

  kept.push_back(input[0]);
  for (std::size_t i = 1; i < input.size(); ++i) {
    const std::size_t m = input[i];
    const auto v = v_of(states, sorted, m, active);
    const bool linked = v && x_of(states, sorted, *v, active) == m;
    if (!linked) {
      if (v) marked[*v] = 1;
      active[m] = 0;
      rest.push_back(m);
      continue;
    }
    kept.push_back(m);
    const auto x = x_of(states, sorted, m, active);
    if (x && v_of(states, sorted, *x, active) != m) marked[*x] = 1;
  }
  return kept;
}

SequenceDecomposition build_sequences(const ChainInput& input) {
  input.validate();
  const StateSet& states = input.states;
  const std::size_t n = states.size();
  SequenceDecomposition dec;
  dec.sorted = sort_by_eta(input.eta);

  std::vector<char> marked(n, 0);
  std::vector<std::vector<std::size_t>> raw;
  std::vector<std::size_t> current = dec.sorted.order;
  while (!current.empty()) {
    std::vector<std::size_t> rest;
    raw.push_back(extract_sequence(states, dec.sorted, current, rest, marked));
    current = std::move(rest);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (marked[i]) dec.connection_points.push_back(i);

  std::vector<char> placed(n, 0);
  auto place = [&](Sequence seq) {
    for (std::size_t s : seq.states) placed[s] = 1;
    dec.sequences.push_back(std::move(seq));
  };
  auto placed_neighbors = [&](std::size_t s) {
    std::vector<std::size_t> out;
    for (std::size_t j : states.neighbors(s))
      if (placed[j]) out.push_back(j);
    return out;
  };
  // Marked first, then by eta (largest or smallest), then by index.
  auto pick = [&](std::vector<std::size_t> cands, bool largest_eta,
                  std::optional<std::size_t> exclude) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t j : cands) {
      if (exclude && j == *exclude) continue;
      if (!best) {
        best = j;
        continue;
      }
      const std::size_t b = *best;
      if (marked[j] != marked[b]) {
        if (marked[j]) best = j;
        continue;
      }
      const double ej = input.eta[j], eb = input.eta[b];
      if (ej != eb) {
        if (largest_eta ? ej > eb : ej < eb) best = j;
        continue;
      }
      if (j < b) best = j;
    }
    return best;
  };

  place(Sequence{raw.front(), std::nullopt, std::nullopt});
  std::deque<std::vector<std::size_t>> pending(raw.begin() + 1, raw.end());
  while (!pending.empty()) {
    bool progress = false;
    const std::size_t rounds = pending.size();
    for (std::size_t r = 0; r < rounds; ++r) {
      auto seq = std::move(pending.front());
      pending.pop_front();
      const auto head = placed_neighbors(seq.front());
      const auto tail = placed_neighbors(seq.back());
      if (head.empty() && tail.empty()) {
        pending.push_back(std::move(seq));
        continue;
      }
      Sequence out{std::move(seq), std::nullopt, std::nullopt};
      out.branch = pick(head, true, std::nullopt);
      const bool single = out.states.size() == 1;
      out.merge = pick(tail, false, single ? out.branch : std::nullopt);
      place(std::move(out));
      progress = true;
    }
    if (progress || pending.empty()) continue;

    // Nothing connects at an end: split the first sequence that touches the
    // placed states somewhere in its middle.
    bool split = false;
    for (auto it = pending.begin(); it != pending.end() && !split; ++it) {
      for (std::size_t i = 1; i + 1 < it->size(); ++i) {
        if (placed_neighbors((*it)[i]).empty()) continue;
        std::vector<std::size_t> prefix(it->begin(), it->begin() + static_cast<std::ptrdiff_t>(i));
        std::vector<std::size_t> suffix(it->begin() + static_cast<std::ptrdiff_t>(i), it->end());
        pending.erase(it);
        pending.push_front(std::move(prefix));
        pending.push_front(std::move(suffix));
        ++dec.splits;
        split = true;
        break;
      }
    }
    if (!split) {
      std::vector<std::size_t> unreachable;
      for (const auto& seq : pending) unreachable.insert(unreachable.end(), seq.begin(), seq.end());
      std::sort(unreachable.begin(), unreachable.end());
      throw DisconnectedSupport("disconnected support: states " + describe_states(states, unreachable) +
                                " have no neighbor path to the rest of the support");
    }
  }
  return dec;
}

// ---------------------------------------------------------------------------
// Theta construction

double basic_update(TransitionMatrix& theta, const ChainInput& input, std::size_t m,
                    std::size_t m_prime) {
  const StateSet& states = input.states;
  if (m >= states.size() || m_prime >= states.size() || theta.size() != states.size())
    throw InvalidArgument("state index out of range");
  if (!states.are_neighbors(m, m_prime)) throw InvalidArgument("basic_update needs a neighbor pair");

  const ContentId k = states.linking_content(m, m_prime);        // in m', requested in m
  const ContentId k_back = states.linking_content(m_prime, m);   // in m, requested in m'
  const std::size_t c = states.cache_size();
  const double eta_m = input.eta[m];
  const double eta_mp = input.eta[m_prime];

  double diag_m = theta.diagonal(m);
  double diag_mp = theta.diagonal(m_prime);
  // Re-linking a pair replaces its old contribution.
  diag_m += theta.get(m_prime, m);
  diag_mp += theta.get(m, m_prime);

  // Forward and backward caps; whichever binds is used verbatim so that tau
  // lands exactly on omega when the cap is reached.
  const double fwd_cap = input.omega(k, m_prime, m, c) * input.phi_of(k);
  const double back_cap = input.omega(k_back, m, m_prime, c) * input.phi_of(k_back);
  double delta, back;
  if (fwd_cap * eta_m <= back_cap * eta_mp) {
    delta = fwd_cap;
    back = std::min(back_cap, delta * eta_m / eta_mp);
  } else {
    back = back_cap;
    delta = std::min(fwd_cap, back * eta_mp / eta_m);
  }
  back = snap(back);
  diag_m = snap(diag_m - delta);
  diag_mp = snap(diag_mp - back);
  if (diag_m < 0.0 || diag_mp < 0.0) {
    std::ostringstream os;
    os << "limit configuration infeasible: linking states " << m << " and " << m_prime
       << " drives a diagonal to " << std::min(diag_m, diag_mp);
    throw InfeasibleLimits(os.str());
  }
  theta.set(m_prime, m, snap(delta));
  theta.set(m, m_prime, back);
  theta.set(m, m, diag_m);
  theta.set(m_prime, m_prime, diag_mp);
  return delta;
}

TransitionMatrix generate_theta(const ChainInput& input, const SequenceDecomposition& dec) {
  TransitionMatrix theta = TransitionMatrix::identity(input.size());
  for (const auto& seq : dec.sequences) {
    if (seq.branch) basic_update(theta, input, *seq.branch, seq.states.front());
    if (seq.merge) basic_update(theta, input, *seq.merge, seq.states.back());
    for (std::size_t q = seq.states.size(); q-- > 1;)
      basic_update(theta, input, seq.states[q - 1], seq.states[q]);
  }
  return theta;
}

TransitionMatrix refine_theta(TransitionMatrix theta, const ChainInput& input,
                              const SortedOrder& sorted) {
  const StateSet& states = input.states;
  std::vector<std::size_t> later;
  for (std::size_t i = 0; i < sorted.order.size(); ++i) {
    const std::size_t m = sorted.order[i];
    later.clear();
    for (std::size_t j : states.neighbors(m))
      if (sorted.position[j] > i) later.push_back(j);
    std::sort(later.begin(), later.end(),
              [&](std::size_t a, std::size_t b) { return sorted.position[a] < sorted.position[b]; });
    for (std::size_t j : later)
      if (theta.get(j, m) == 0.0) basic_update(theta, input, m, j);
  }
  return theta;
}

// ---------------------------------------------------------------------------
// Replacement probabilities

ReplacementPolicy::ReplacementPolicy(StateSet states, std::vector<std::vector<ReplacementMove>> moves)
    : states_(std::move(states)), moves_(std::move(moves)) {
  if (moves_.size() != states_.size()) throw InvalidArgument("one move list per state expected");
  for (auto& list : moves_)
    std::sort(list.begin(), list.end(), [](const ReplacementMove& a, const ReplacementMove& b) {
      return a.content != b.content ? a.content < b.content : a.to < b.to;
    });
}

std::span<const ReplacementMove> ReplacementPolicy::moves(std::size_t m, ContentId k) const {
  const auto& list = moves_[m];
  auto lo = std::lower_bound(list.begin(), list.end(), k,
                             [](const ReplacementMove& mv, ContentId key) { return mv.content < key; });
  auto hi = std::upper_bound(lo, list.end(), k,
                             [](ContentId key, const ReplacementMove& mv) { return key < mv.content; });
  return {lo, hi};
}

double ReplacementPolicy::tau(std::size_t to, std::size_t from) const {
  for (const auto& mv : moves_[from])
    if (mv.to == to) return mv.tau;
  return 0.0;
}

double ReplacementPolicy::residual(std::size_t m, ContentId k) const {
  if (states_.state(m).contains(k)) return 1.0;
  double r = 1.0;
  for (const auto& mv : moves(m, k)) r -= mv.tau;
  return r;
}

ReplacementPolicy derive_tau(const TransitionMatrix& theta, const ChainInput& input) {
  const StateSet& states = input.states;
  if (theta.size() != states.size()) throw InvalidArgument("matrix size must equal the number of states");
  std::vector<std::vector<ReplacementMove>> moves(states.size());
  for (std::size_t m = 0; m < states.size(); ++m) {
    for (const auto& e : theta.off_diagonal(m)) {
      if (!states.are_neighbors(m, e.row))
        throw InvalidArgument("transition between non-neighbor states");
      const ContentId k = states.linking_content(m, e.row);
      const double phi = input.phi_of(k);
      if (phi == 0.0) {
        std::ostringstream os;
        os << "inconsistent chain: transition " << m << " -> " << e.row << " is triggered by content "
           << k << " which is never requested";
        throw Error(os.str());
      }
      moves[m].push_back({e.row, k, e.value / phi});
    }
  }
  return ReplacementPolicy(states, std::move(moves));
}

CompiledChain compile_chain(const ChainInput& input, bool refine) {
  CompiledChain out;
  out.decomposition = build_sequences(input);
  out.basic = generate_theta(input, out.decomposition);
  out.theta = refine ? refine_theta(out.basic, input, out.decomposition.sorted) : out.basic;
  out.policy = derive_tau(out.theta, input);
  return out;
}

// ---------------------------------------------------------------------------
// Verification

std::size_t strongly_connected_components(const TransitionMatrix& theta) {
  const std::size_t n = theta.size();
  if (n == 0) return 0;
  std::vector<std::vector<std::size_t>> fwd(n), rev(n);
  for (std::size_t col = 0; col < n; ++col)
    for (const auto& e : theta.off_diagonal(col))
      if (e.value > 0.0) {
        fwd[col].push_back(e.row);
        rev[e.row].push_back(col);
      }
  // Kosaraju with explicit stacks.
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> finish;
  finish.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{s, 0}};
    seen[s] = 1;
    while (!stack.empty()) {
      auto& [u, i] = stack.back();
      if (i < fwd[u].size()) {
        const std::size_t v = fwd[u][i++];
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back({v, 0});
        }
      } else {
        finish.push_back(u);
        stack.pop_back();
      }
    }
  }
  std::vector<char> assigned(n, 0);
  std::size_t components = 0;
  for (auto it = finish.rbegin(); it != finish.rend(); ++it) {
    if (assigned[*it]) continue;
    ++components;
    std::vector<std::size_t> stack{*it};
    assigned[*it] = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : rev[u])
        if (!assigned[v]) {
          assigned[v] = 1;
          stack.push_back(v);
        }
    }
  }
  return components;
}

std::size_t chain_period(const TransitionMatrix& theta) {
  const std::size_t n = theta.size();
  if (n == 0 || strongly_connected_components(theta) != 1) return 0;
  std::vector<long long> level(n, -1);
  std::vector<std::size_t> queue{0};
  level[0] = 0;
  for (std::size_t h = 0; h < queue.size(); ++h) {
    const std::size_t u = queue[h];
    for (const auto& e : theta.off_diagonal(u))
      if (e.value > 0.0 && level[e.row] < 0) {
        level[e.row] = level[u] + 1;
        queue.push_back(e.row);
      }
  }
  long long g = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (theta.diagonal(u) > 0.0) g = std::gcd(g, 1LL);
    for (const auto& e : theta.off_diagonal(u))
      if (e.value > 0.0) g = std::gcd(g, std::llabs(level[u] + 1 - level[e.row]));
  }
  return static_cast<std::size_t>(g);
}

namespace {

double max_column_tv(const Eigen::MatrixXd& p, std::span<const double> eta) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    double tv = 0.0;
    for (Eigen::Index r = 0; r < p.rows(); ++r) tv += std::abs(p(r, c) - eta[static_cast<std::size_t>(r)]);
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

// Largest total-variation distance to eta of Theta^t applied to any start.
double limit_distance(const TransitionMatrix& theta, std::span<const double> eta) {
  const std::size_t n = theta.size();
  if (n <= 300) {
    Eigen::MatrixXd p = theta.dense();
    double tv = max_column_tv(p, eta);
    for (int i = 0; i < 64 && tv > 1e-13; ++i) {
      p = p * p;
      // Squaring doubles any column-sum error; keep the oracle stochastic.
      p = p * p.colwise().sum().cwiseInverse().asDiagonal();
      tv = max_column_tv(p, eta);
    }
    return tv;
  }
  // Large chains: iterate from the uniform start.
  std::vector<double> x(n, 1.0 / static_cast<double>(n));
  double tv = 1.0;
  for (std::size_t t = 0; t < 200000; ++t) {
    x = theta.multiply(x);
    if (t % 64 == 0) {
      tv = 0.0;
      for (std::size_t i = 0; i < n; ++i) tv += std::abs(x[i] - eta[i]);
      tv *= 0.5;
      if (tv < 1e-12) break;
    }
  }
  return tv;
}

}  // namespace

Theorem1Report verify_theorem1(const TransitionMatrix& theta, const ChainInput& input) {
  Theorem1Report r;
  const StateSet& states = input.states;
  const std::size_t n = theta.size();
  if (n != states.size() || input.eta.size() != n) throw InvalidArgument("size mismatch");

  r.min_entry = 1.0;
  r.max_entry = 0.0;
  r.neighbor_structure = true;
  for (std::size_t m = 0; m < n; ++m) {
    r.max_column_error = std::max(r.max_column_error, std::abs(theta.column_sum(m) - 1.0));
    r.min_entry = std::min(r.min_entry, theta.diagonal(m));
    r.max_entry = std::max(r.max_entry, theta.diagonal(m));
    for (const auto& e : theta.off_diagonal(m)) {
      r.min_entry = std::min(r.min_entry, e.value);
      r.max_entry = std::max(r.max_entry, e.value);
      if (!states.are_neighbors(m, e.row)) r.neighbor_structure = false;
    }
  }
  r.stochastic = r.max_column_error <= tolerance::kSimplex && r.min_entry >= 0.0 && r.max_entry <= 1.0;

  if (r.neighbor_structure) {
    try {
      const ReplacementPolicy policy = derive_tau(theta, input);
      bool ok = true;
      for (std::size_t m = 0; m < n; ++m) {
        double run = 0.0;
        ContentId last = 0;
        for (const auto& mv : policy.moves(m)) {
          if (mv.content != last) run = 0.0;
          last = mv.content;
          run += mv.tau;
          r.max_tau = std::max(r.max_tau, mv.tau);
          r.max_tau_sum = std::max(r.max_tau_sum, run);
          r.max_offdiag_over_phi = std::max(r.max_offdiag_over_phi, mv.tau);
          if (mv.tau < 0.0) ok = false;
        }
      }
      r.tau_bounds = ok && r.max_tau <= 1.0 + tolerance::kSimplex &&
                     r.max_tau_sum <= 1.0 + tolerance::kSimplex;
    } catch (const Error&) {
      r.tau_bounds = false;
    }
  }

  const auto image = theta.multiply(input.eta);
  for (std::size_t i = 0; i < n; ++i)
    r.fixed_point_error = std::max(r.fixed_point_error, std::abs(image[i] - input.eta[i]));
  r.fixed_point = r.fixed_point_error <= tolerance::kSimplex;

  r.irreducible = strongly_connected_components(theta) == 1;
  r.period = chain_period(theta);
  r.aperiodic = r.period == 1;

  r.limit_tv = limit_distance(theta, input.eta);
  r.converges = r.limit_tv <= tolerance::kResidual;
  return r;
}

// ---------------------------------------------------------------------------
// Conditional matrices

std::vector<TransitionMatrix> conditional_matrices(const ReplacementPolicy& policy) {
  const StateSet& states = policy.states();
  const std::size_t n = states.size();
  std::vector<TransitionMatrix> out;
  out.reserve(states.n_contents());
  for (ContentId k = 1; k <= states.n_contents(); ++k) {
    TransitionMatrix t(n);
    for (std::size_t m = 0; m < n; ++m) {
      if (states.state(m).contains(k)) {
        t.set(m, m, 1.0);
        continue;
      }
      for (const auto& mv : policy.moves(m, k)) t.set(mv.to, m, mv.tau);
      t.set(m, m, policy.residual(m, k));
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TransitionMatrix> conditional_matrices(const TransitionMatrix& theta,
                                                   const ChainInput& input) {
  return conditional_matrices(derive_tau(theta, input));
}

namespace {

// Adds weight * column m of t into the scratch column.
void accumulate_column(const TransitionMatrix& t, std::size_t m, double weight,
                       std::vector<double>& scratch, std::vector<std::size_t>& touched,
                       std::vector<char>& seen) {
  auto add = [&](std::size_t row, double v) {
    if (!seen[row]) {
      seen[row] = 1;
      touched.push_back(row);
    }
    scratch[row] += v;
  };
  if (t.diagonal(m) != 0.0) add(m, weight * t.diagonal(m));
  for (const auto& e : t.off_diagonal(m)) add(e.row, weight * e.value);
}

TransitionMatrix combine(std::span<const TransitionMatrix> conditionals,
                         std::span<const std::vector<double>> weights, double scale) {
  if (conditionals.empty()) throw InvalidArgument("no conditional matrices");
  const std::size_t n = conditionals.front().size();
  for (const auto& w : weights)
    if (w.size() != conditionals.size())
      throw InvalidArgument("popularity length must equal the number of conditional matrices");
  TransitionMatrix out(n);
  std::vector<double> scratch(n, 0.0);
  std::vector<std::size_t> touched;
  std::vector<char> seen(n, 0);
  for (std::size_t m = 0; m < n; ++m) {
    for (const auto& w : weights)
      for (std::size_t k = 0; k < conditionals.size(); ++k)
        if (w[k] != 0.0) accumulate_column(conditionals[k], m, w[k], scratch, touched, seen);
    std::sort(touched.begin(), touched.end());
    for (std::size_t row : touched) {
      out.set(row, m, scratch[row] * scale);
      scratch[row] = 0.0;
      seen[row] = 0;
    }
    touched.clear();
  }
  return out;
}

}  // namespace

TransitionMatrix mix_conditionals(std::span<const TransitionMatrix> conditionals,
                                  std::span<const double> phi) {
  const std::vector<std::vector<double>> one{std::vector<double>(phi.begin(), phi.end())};
  return combine(conditionals, one, 1.0);
}

TransitionMatrix average_theta(std::span<const TransitionMatrix> conditionals,
                               std::span<const std::vector<double>> popularity_sequence) {
  if (popularity_sequence.empty()) throw InvalidArgument("empty popularity sequence");
  for (const auto& phi : popularity_sequence) {
    double sum = 0.0;
    for (double v : phi) {
      if (!(v >= 0.0)) throw InvalidArgument("popularity entries must be non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance::kResidual) throw InvalidArgument("popularity must sum to 1");
  }
  return combine(conditionals, popularity_sequence,
                 1.0 / static_cast<double>(popularity_sequence.size()));
}

}  // namespace dpc
