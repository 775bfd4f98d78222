#include "dpc/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "dpc/errors.hpp"

namespace dpc {

// ---------------------------------------------------------------------------
// ContentCatalog

ContentCatalog::ContentCatalog(std::vector<double> popularity) : phi_(std::move(popularity)) {
  if (phi_.empty()) throw InvalidArgument("catalog must contain at least one content");
  double total = 0.0;
  for (double v : phi_) {
    if (!(v >= 0.0)) throw InvalidArgument("popularity entries must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "popularity must sum to 1 (got " << total << ")";
    throw InvalidArgument(os.str());
  }
}

ContentCatalog ContentCatalog::zipf(std::size_t n_contents, double s) {
  if (n_contents == 0) throw InvalidArgument("catalog must contain at least one content");
  std::vector<double> phi(n_contents);
  for (std::size_t k = 0; k < n_contents; ++k) phi[k] = std::pow(static_cast<double>(k + 1), -s);
  // sum smallest-first for a stable total
  const double total = std::accumulate(phi.rbegin(), phi.rend(), 0.0);
  for (double& v : phi) v /= total;
  return ContentCatalog(std::move(phi));
}

// ---------------------------------------------------------------------------
// CacheState

bool CacheState::contains(ContentId k) const {
  return std::binary_search(contents.begin(), contents.end(), k);
}

std::size_t state_distance(std::span<const ContentId> a, std::span<const ContentId> b) {
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) {
      ++common;
      ++i;
      ++j;
    } else if (*i < *j) {
      ++i;
    } else {
      ++j;
    }
  }
  return a.size() - common;
}

// ---------------------------------------------------------------------------
// StateSpace

StateSpace StateSpace::enumerate(std::size_t n_contents, std::size_t cache_size, std::uint64_t cap) {
  if (cache_size < 1 || cache_size > n_contents) {
    throw InvalidArgument("cache size must satisfy 1 <= c <= N_f");
  }
  const auto count = binomial(n_contents, cache_size);
  if (!count || *count > cap) {
    std::ostringstream os;
    os << "state space too large, use truncation: C(" << n_contents << ", " << cache_size
       << ") exceeds the cap of " << cap << " states";
    throw StateSpaceTooLarge(os.str());
  }
  return StateSpace(CombinationIndexer(static_cast<std::uint32_t>(n_contents),
                                       static_cast<std::uint32_t>(cache_size)));
}

void StateSpace::check_index(StateIndex m) const {
  if (m >= size()) throw InvalidArgument("state index out of range");
}

CacheState StateSpace::state(StateIndex m) const {
  check_index(m);
  CacheState s;
  s.contents.resize(cache_size());
  indexer_.unrank(m, s.contents);
  return s;
}

StateIndex StateSpace::index_of(std::span<const ContentId> contents) const {
  if (contents.size() != cache_size()) throw InvalidArgument("state must hold exactly c contents");
  for (std::size_t i = 0; i < contents.size(); ++i) {
    if (contents[i] < 1 || contents[i] > n_contents()) throw InvalidArgument("content id out of range");
    if (i > 0 && contents[i] <= contents[i - 1]) {
      throw InvalidArgument("state contents must be strictly increasing");
    }
  }
  return static_cast<StateIndex>(indexer_.rank(contents));
}

std::vector<StateIndex> StateSpace::neighbors(StateIndex m) const {
  const CacheState s = state(m);
  std::vector<StateIndex> out;
  out.reserve(cache_size() * (n_contents() - cache_size()));
  for (ContentId k = 1; k <= n_contents(); ++k) {
    if (s.contains(k)) continue;
    auto h = neighbors_by_content(m, k);
    out.insert(out.end(), h.begin(), h.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<StateIndex> StateSpace::neighbors_by_content(StateIndex m, ContentId k) const {
  const CacheState s = state(m);
  if (k < 1 || k > n_contents()) throw InvalidArgument("content id out of range");
  if (s.contains(k)) throw InvalidArgument("content already cached");
  std::vector<StateIndex> out;
  out.reserve(cache_size());
  std::vector<ContentId> next;
  next.reserve(cache_size());
  for (std::size_t drop = 0; drop < s.size(); ++drop) {
    next.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != drop) next.push_back(s.contents[i]);
    }
    next.insert(std::upper_bound(next.begin(), next.end(), k), k);
    out.push_back(static_cast<StateIndex>(indexer_.rank(next)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// StateMatrix

StateMatrix state_matrix(const StateSpace& space) { return StateMatrix(space); }

std::vector<double> StateMatrix::multiply(std::span<const double> eta) const {
  if (eta.size() != cols()) throw InvalidArgument("eta length must equal the number of states");
  std::vector<double> p(rows(), 0.0);
  for (StateIndex m = 0; m < cols(); ++m) {
    if (eta[m] == 0.0) continue;
    for (ContentId k : space_.state(m).contents) p[k - 1] += eta[m];
  }
  return p;
}

std::vector<double> StateMatrix::transpose_multiply(std::span<const double> y) const {
  if (y.size() != rows()) throw InvalidArgument("vector length must equal N_f");
  std::vector<double> out(cols(), 0.0);
  for (StateIndex m = 0; m < cols(); ++m) {
    double acc = 0.0;
    for (ContentId k : space_.state(m).contents) acc += y[k - 1];
    out[m] = acc;
  }
  return out;
}

std::vector<std::uint64_t> StateMatrix::row_sums() const {
  std::vector<std::uint64_t> sums(rows(), 0);
  for (StateIndex m = 0; m < cols(); ++m) {
    for (ContentId k : space_.state(m).contents) ++sums[k - 1];
  }
  return sums;
}

std::vector<std::uint64_t> StateMatrix::column_sums() const {
  std::vector<std::uint64_t> sums(cols());
  for (StateIndex m = 0; m < cols(); ++m) sums[m] = space_.state(m).size();
  return sums;
}

Eigen::MatrixXd StateMatrix::dense() const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()),
                                            static_cast<Eigen::Index>(cols()));
  for (StateIndex m = 0; m < cols(); ++m) {
    for (ContentId k : space_.state(m).contents) s(k - 1, static_cast<Eigen::Index>(m)) = 1.0;
  }
  return s;
}

// ---------------------------------------------------------------------------
// StateSet

std::size_t StateSet::VectorHash::operator()(const std::vector<ContentId>& v) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (ContentId x : v) {
    h ^= x;
    h *= 1099511628211ull;
  }
  return h;
}

StateSet::StateSet(std::size_t n_contents, std::size_t cache_size, std::vector<CacheState> states)
    : n_contents_(n_contents), cache_size_(cache_size), states_(std::move(states)) {
  lookup_.reserve(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const auto& c = states_[i].contents;
    if (c.size() != cache_size_) throw InvalidArgument("every state must hold exactly c contents");
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (c[j] < 1 || c[j] > n_contents_) throw InvalidArgument("content id out of range");
      if (j > 0 && c[j] <= c[j - 1]) throw InvalidArgument("state contents must be strictly increasing");
    }
    if (!lookup_.emplace(c, i).second) throw InvalidArgument("duplicate state in state set");
  }
  build_neighbors();
}

void StateSet::build_neighbors() {
  neighbors_.assign(states_.size(), {});
  const std::size_t n = states_.size();
  const std::size_t per_state = cache_size_ * (n_contents_ - cache_size_);
  if (n * cache_size_ <= 4 * per_state + 64) {
    // pairwise scan is cheaper for small sets over large catalogs
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (state_distance(states_[i].contents, states_[j].contents) == 1) {
          neighbors_[i].push_back(j);
          neighbors_[j].push_back(i);
        }
      }
    }
  } else {
    std::vector<ContentId> next;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = states_[i];
      for (ContentId k = 1; k <= n_contents_; ++k) {
        if (s.contains(k)) continue;
        for (std::size_t drop = 0; drop < s.size(); ++drop) {
          next.clear();
          for (std::size_t t = 0; t < s.size(); ++t) {
            if (t != drop) next.push_back(s.contents[t]);
          }
          next.insert(std::upper_bound(next.begin(), next.end(), k), k);
          if (auto it = lookup_.find(next); it != lookup_.end()) neighbors_[i].push_back(it->second);
        }
      }
    }
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

StateSet StateSet::support_of(const StateSpace& space, std::span<const double> eta) {
  if (eta.size() != space.size()) throw InvalidArgument("eta length must equal the number of states");
  std::vector<CacheState> states;
  std::vector<StateIndex> canonical;
  for (StateIndex m = 0; m < space.size(); ++m) {
    if (eta[m] > 0.0) {
      states.push_back(space.state(m));
      canonical.push_back(m);
    }
  }
  StateSet set(space.n_contents(), space.cache_size(), std::move(states));
  set.canonical_ = std::move(canonical);
  return set;
}

StateSet StateSet::all_of(const StateSpace& space) {
  std::vector<double> ones(space.size(), 1.0);
  return support_of(space, ones);
}

std::optional<std::size_t> StateSet::find(std::span<const ContentId> contents) const {
  std::vector<ContentId> key(contents.begin(), contents.end());
  if (auto it = lookup_.find(key); it != lookup_.end()) return it->second;
  return std::nullopt;
}

bool StateSet::are_neighbors(std::size_t i, std::size_t j) const {
  const auto& nb = neighbors_[i];
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::vector<std::size_t> StateSet::neighbors_by_content(std::size_t i, ContentId k) const {
  if (states_[i].contains(k)) throw InvalidArgument("content already cached");
  std::vector<std::size_t> out;
  for (std::size_t j : neighbors_[i]) {
    if (states_[j].contains(k)) out.push_back(j);
  }
  return out;
}

ContentId StateSet::linking_content(std::size_t from, std::size_t to) const {
  const auto& a = states_[from];
  for (ContentId k : states_[to].contents) {
    if (!a.contains(k)) return k;
  }
  throw InvalidArgument("states are identical, no linking content");
}

std::vector<ContentId> StateSet::content_union() const {
  std::set<ContentId> all;
  for (const auto& s : states_) all.insert(s.contents.begin(), s.contents.end());
  return {all.begin(), all.end()};
}

// ---------------------------------------------------------------------------
// Truncation

double state_popularity(const ContentCatalog& catalog, const CacheState& s) {
  double acc = 0.0;
  for (ContentId k : s.contents) acc += catalog.phi(k);
  return acc;
}

CacheState Truncation::lift(const CacheState& reduced) const {
  CacheState out;
  out.contents = pinned;
  for (ContentId r : reduced.contents) out.contents.push_back(fractional.at(r - 1));
  std::sort(out.contents.begin(), out.contents.end());
  return out;
}

std::vector<double> Truncation::restrict(std::span<const double> full) const {
  std::vector<double> out;
  out.reserve(fractional.size());
  for (ContentId k : fractional) out.push_back(full[k - 1]);
  return out;
}

std::vector<CacheState> top_states_by_popularity(const ContentCatalog& catalog,
                                                 std::span<const ContentId> candidates,
                                                 std::size_t cache_size, std::size_t k,
                                                 std::span<const ContentId> always_cached) {
  const std::size_t n = candidates.size();
  if (cache_size > n) throw InvalidArgument("cache size exceeds the number of candidate contents");
  const auto available = binomial(n, cache_size);
  if (k == 0) throw InvalidArgument("number of kept states must be positive");
  if (available && k > *available) {
    std::ostringstream os;
    os << "requested " << k << " states but only " << *available << " exist";
    throw InvalidArgument(os.str());
  }

  // Candidates by non-increasing phi, ties by id. A state is a strictly
  // increasing list of positions into this order; moving one position down
  // by one never increases the sum, and every subset is reachable from
  // {0..c-1} that way, so best-first search pops states in sum order.
  std::vector<ContentId> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end(), [&](ContentId a, ContentId b) {
    const double pa = catalog.phi(a), pb = catalog.phi(b);
    return pa != pb ? pa > pb : a < b;
  });

  using Positions = std::vector<std::uint32_t>;
  struct Node {
    double sum;
    Positions pos;
  };
  auto sum_of = [&](const Positions& pos) {
    double s = 0.0;
    for (auto p : pos) s += catalog.phi(order[p]);
    return s;
  };
  auto cmp = [](const Node& a, const Node& b) { return a.sum < b.sum; };
  std::priority_queue<Node, std::vector<Node>, decltype(cmp)> heap(cmp);
  std::set<Positions> seen;

  Positions start(cache_size);
  std::iota(start.begin(), start.end(), 0u);
  heap.push({sum_of(start), start});
  seen.insert(start);

  std::vector<Node> popped;
  double threshold = 0.0;
  while (!heap.empty()) {
    if (popped.size() >= k && heap.top().sum < threshold) break;
    Node node = heap.top();
    heap.pop();
    for (std::size_t i = 0; i < cache_size; ++i) {
      const auto next = node.pos[i] + 1;
      if (next >= n) continue;
      if (i + 1 < cache_size && node.pos[i + 1] == next) continue;
      Positions child = node.pos;
      child[i] = next;
      if (seen.insert(child).second) heap.push({sum_of(child), std::move(child)});
    }
    popped.push_back(std::move(node));
    if (popped.size() == k) threshold = popped.back().sum;
  }

  std::vector<std::pair<double, CacheState>> ranked;
  ranked.reserve(popped.size());
  for (const auto& node : popped) {
    CacheState s;
    s.contents.assign(always_cached.begin(), always_cached.end());
    for (auto p : node.pos) s.contents.push_back(order[p]);
    std::sort(s.contents.begin(), s.contents.end());
    ranked.emplace_back(node.sum, std::move(s));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  ranked.resize(std::min(k, ranked.size()));
  std::vector<CacheState> out;
  out.reserve(ranked.size());
  for (auto& r : ranked) out.push_back(std::move(r.second));
  std::sort(out.begin(), out.end());
  return out;
}

Truncation truncate(const ContentCatalog& catalog, std::span<const double> target,
                    const TruncationConfig& config, std::uint64_t cap) {
  if (target.size() != catalog.size()) throw InvalidArgument("target length must equal N_f");
  const double total = std::accumulate(target.begin(), target.end(), 0.0);
  const auto cache_size = static_cast<std::size_t>(std::llround(total));
  if (cache_size < 1 || std::abs(total - static_cast<double>(cache_size)) > 1e-9) {
    throw InvalidArgument("caching probabilities must sum to a positive integer cache size");
  }

  Truncation t;
  for (ContentId k = 1; k <= target.size(); ++k) {
    const double p = target[k - 1];
    if (p < -config.tolerance || p > 1.0 + config.tolerance) {
      throw InvalidArgument("caching probabilities must lie in [0, 1]");
    }
    if (config.drop_zero_prob && p <= config.tolerance) {
      t.dropped.push_back(k);
    } else if (config.pin_certain && p >= 1.0 - config.tolerance) {
      t.pinned.push_back(k);
    } else {
      t.fractional.push_back(k);
    }
  }
  if (t.pinned.size() > cache_size) throw InvalidArgument("more certain contents than cache slots");
  t.residual_cache_size = cache_size - t.pinned.size();
  if (t.residual_cache_size > t.fractional.size()) {
    throw InvalidArgument("not enough cacheable contents to fill the cache");
  }

  const std::size_t n_contents = catalog.size();
  if (t.residual_cache_size == 0) {
    t.states = StateSet(n_contents, cache_size, {CacheState{t.pinned}});
    return t;
  }

  if (config.top_k_states) {
    auto kept = top_states_by_popularity(catalog, t.fractional, t.residual_cache_size,
                                         *config.top_k_states, t.pinned);
    t.states = StateSet(n_contents, cache_size, std::move(kept));
    return t;
  }

  t.reduced_space = StateSpace::enumerate(t.fractional.size(), t.residual_cache_size, cap);
  std::vector<CacheState> lifted;
  lifted.reserve(t.reduced_space->size());
  for (StateIndex m = 0; m < t.reduced_space->size(); ++m) {
    lifted.push_back(t.lift(t.reduced_space->state(m)));
  }
  t.states = StateSet(n_contents, cache_size, std::move(lifted));
  return t;
}

}  // namespace dpc
