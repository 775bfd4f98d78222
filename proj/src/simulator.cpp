#include "dpc/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "dpc/errors.hpp"

namespace dpc {

namespace {

void check_state(const CacheState& s, std::size_t c) {
  if (s.size() != c) throw InvalidArgument("initial state must hold exactly c contents");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.contents[i] < 1) throw InvalidArgument("content ids start at 1");
    if (i && s.contents[i - 1] >= s.contents[i]) throw InvalidArgument("state contents must be strictly increasing");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Policies

ProposedPolicy::ProposedPolicy(std::shared_ptr<const ReplacementPolicy> policy) : policy_(std::move(policy)) {
  if (!policy_ || policy_->size() == 0) throw InvalidArgument("proposed policy needs at least one state");
  const auto contents = policy_->states().content_union();
  cacheable_.assign(contents.empty() ? 1 : contents.back() + 1, 0);
  for (ContentId k : contents) cacheable_[k] = 1;
}

void ProposedPolicy::reset(const CacheState& initial) {
  const auto i = policy_->states().find(initial.contents);
  if (!i) throw InvalidArgument("initial state is not in the policy's state set");
  current_ = *i;
}

RequestOutcome ProposedPolicy::request(ContentId k, Rng& rng) {
  RequestOutcome out;
  if (k >= cacheable_.size() || !cacheable_[k]) {
    out.uncacheable = true;
    return out;
  }
  if (state().contains(k)) {
    out.hit = true;
    return out;
  }
  const auto moves = policy_->moves(current_, k);
  if (moves.empty()) return out;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  for (const auto& mv : moves) {
    cum += mv.tau;
    if (u < cum) {
      current_ = mv.to;
      out.replaced = true;
      break;
    }
  }
  return out;
}

void StaticPolicy::reset(const CacheState& initial) {
  check_state(initial, c_);
  state_ = initial;
}

RequestOutcome StaticPolicy::request(ContentId k, Rng&) {
  RequestOutcome out;
  out.hit = state_.contains(k);
  return out;
}

void RecencyFrequencyPolicy::reset(const CacheState& initial) {
  check_state(initial, c_);
  state_ = initial;
  clock_ = 0;
  last_use_.assign(initial.contents.back() + 1, 0);
  count_.assign(initial.contents.back() + 1, 0);
}

void RecencyFrequencyPolicy::touch(ContentId k) {
  if (k >= last_use_.size()) {
    last_use_.resize(k + 1, 0);
    count_.resize(k + 1, 0);
  }
  last_use_[k] = ++clock_;
  ++count_[k];
}

RequestOutcome RecencyFrequencyPolicy::request(ContentId k, Rng&) {
  RequestOutcome out;
  touch(k);
  auto& v = state_.contents;
  if (std::binary_search(v.begin(), v.end(), k)) {
    out.hit = true;
    return out;
  }
  auto victim = std::min_element(v.begin(), v.end(), [&](ContentId a, ContentId b) {
    if (kind_ == Kind::Lfu && count_[a] != count_[b]) return count_[a] < count_[b];
    if (last_use_[a] != last_use_[b]) return last_use_[a] < last_use_[b];
    return a < b;
  });
  v.erase(victim);
  v.insert(std::upper_bound(v.begin(), v.end(), k), k);
  out.replaced = true;
  return out;
}

std::unique_ptr<CachePolicy> make_lru(std::size_t cache_size) {
  return std::make_unique<RecencyFrequencyPolicy>(RecencyFrequencyPolicy::Kind::Lru, cache_size);
}

std::unique_ptr<CachePolicy> make_lfu(std::size_t cache_size) {
  return std::make_unique<RecencyFrequencyPolicy>(RecencyFrequencyPolicy::Kind::Lfu, cache_size);
}

CacheState draw_initial_state(const StateSet& states, std::span<const double> eta, Rng& rng) {
  if (eta.size() != states.size()) throw InvalidArgument("eta length differs from the state count");
  StateDistribution d{std::vector<double>(eta.begin(), eta.end())};
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return states.state(sample_state(d, u));
}

// ---------------------------------------------------------------------------
// Runs

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("distance between vectors of different lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

SimulationResult run(CachePolicy& policy, const RequestTrace& trace, const CacheState& initial,
                     std::uint64_t seed, const RunOptions& options) {
  policy.reset(initial);
  Rng rng(seed);
  const std::size_t n = trace.size();

  std::vector<std::size_t> bounds = options.series_boundaries;
  if (bounds.empty() && n > 0) bounds = {0, n};
  if (!bounds.empty()) {
    if (bounds.front() != 0 || bounds.back() != n || !std::is_sorted(bounds.begin(), bounds.end()))
      throw InvalidArgument("series boundaries must rise from 0 to the trace length");
  }

  const StateSet* occ = options.occupancy_states;
  const bool track = occ != nullptr && options.occupancy_window > 0;
  const bool checkpoints = track && options.checkpoint_every > 0 && !options.target_eta.empty();
  if (checkpoints && options.target_eta.size() != occ->size())
    throw InvalidArgument("target eta length differs from the occupancy state count");

  SimulationResult res;
  res.policy = policy.name();
  res.seed = seed;
  res.requests = n;
  if (track) res.occupancy.assign(occ->size(), 0);

  constexpr std::size_t kOutside = static_cast<std::size_t>(-1);
  std::vector<std::size_t> ring(track ? options.occupancy_window : 0, kOutside);
  std::size_t filled = 0, head = 0;
  auto locate = [&] { return occ->find(policy.state().contents).value_or(kOutside); };
  std::size_t where = track ? locate() : kOutside;
  std::vector<double> eta_hat(checkpoints ? occ->size() : 0);

  std::size_t window = 0, window_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (window + 1 < bounds.size() && i >= bounds[window + 1]) {
      res.series.push_back({bounds[window + 1] - bounds[window], window_hits});
      window_hits = 0;
      ++window;
    }
    const auto out = policy.request(trace.requests[i].content, rng);
    if (out.hit) {
      ++res.hits;
      ++window_hits;
    } else {
      ++res.misses;
      if (out.uncacheable) ++res.uncacheable;
    }
    if (out.replaced) {
      ++res.replacements;
      if (track) where = locate();
    }
    if (policy.state().size() != policy.cache_size())
      throw InvariantViolation("cache size changed during a run");

    if (track) {
      if (filled == ring.size()) {
        const auto old = ring[head];
        if (old == kOutside) --res.occupancy_outside; else --res.occupancy[old];
      } else {
        ++filled;
      }
      ring[head] = where;
      head = (head + 1) % ring.size();
      if (where == kOutside) ++res.occupancy_outside; else ++res.occupancy[where];
    }
    if (checkpoints && (i + 1) % options.checkpoint_every == 0) {
      for (std::size_t l = 0; l < eta_hat.size(); ++l)
        eta_hat[l] = static_cast<double>(res.occupancy[l]) / static_cast<double>(filled);
      res.checkpoints.push_back({i + 1, squared_distance(eta_hat, options.target_eta)});
    }
  }
  while (window + 1 < bounds.size()) {
    res.series.push_back({bounds[window + 1] - bounds[window], window_hits});
    window_hits = 0;
    ++window;
  }
  if (res.hits + res.misses != n || res.replacements > res.misses)
    throw InvariantViolation("request counters do not add up");
  return res;
}

StateDistribution empirical_state_distribution(const SimulationResult& result) {
  std::size_t total = result.occupancy_outside;
  for (auto c : result.occupancy) total += c;
  StateDistribution d{std::vector<double>(result.occupancy.size(), 0.0)};
  if (total == 0) return d;
  for (std::size_t l = 0; l < d.probs.size(); ++l)
    d.probs[l] = static_cast<double>(result.occupancy[l]) / static_cast<double>(total);
  return d;
}

// ---------------------------------------------------------------------------
// Batches

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t run_trace_seed(std::uint64_t seed, std::size_t run) { return splitmix64(splitmix64(seed + run) + 1); }

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

std::vector<ComparisonRow> compare(const std::vector<PolicyEntry>& policies,
                                   const std::function<RequestTrace(std::size_t, std::uint64_t)>& make_trace,
                                   const CompareOptions& options) {
  const std::size_t runs = options.n_runs;
  std::vector<std::vector<SimulationResult>> by_run(runs);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < runs;) {
      try {
        const std::uint64_t stream = splitmix64(options.seed + r);
        const auto trace = make_trace(r, run_trace_seed(options.seed, r));
        for (const auto& entry : policies) {
          Rng setup_rng(splitmix64(stream + 2));
          auto setup = entry.make(trace, setup_rng);
          auto result = run(*setup.policy, trace, setup.initial, splitmix64(stream + 3), options.run);
          result.policy = entry.name;
          by_run[r].push_back(std::move(result));
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(runs);
      }
    }
  };
  std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(runs, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<ComparisonRow> rows(policies.size());
  for (std::size_t p = 0; p < policies.size(); ++p) {
    auto& row = rows[p];
    row.policy = policies[p].name;
    row.runs = runs;
    std::vector<double> hit, rep;
    for (std::size_t r = 0; r < runs; ++r) {
      row.results.push_back(std::move(by_run[r][p]));
      hit.push_back(row.results.back().hit_ratio());
      rep.push_back(static_cast<double>(row.results.back().replacements));
    }
    row.hit_ratio = summarize(hit);
    row.replacements = summarize(rep);
  }
  return rows;
}

}  // namespace dpc
