#pragma once

// Trace-driven cache simulation: the proposed randomized replacement policy
// against static caching, LRU and LFU.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dpc/placement.hpp"
#include "dpc/policy.hpp"
#include "dpc/spectral.hpp"
#include "dpc/workload.hpp"

namespace dpc {

using Rng = std::mt19937_64;

struct RequestOutcome {
  bool hit = false;
  bool replaced = false;
  bool uncacheable = false;  // content outside the policy's state space
};

/// A cache of exactly c contents reacting to one request at a time.
class CachePolicy {
 public:
  virtual ~CachePolicy() = default;

  virtual std::string name() const = 0;
  virtual std::size_t cache_size() const = 0;
  /// Load a starting state. Throws InvalidArgument when the state is not usable.
  virtual void reset(const CacheState& initial) = 0;
  virtual RequestOutcome request(ContentId k, Rng& rng) = 0;
  /// Current contents, ascending.
  virtual const CacheState& state() const = 0;
};

/// Moves between states of a ReplacementPolicy by sampling tau on misses.
class ProposedPolicy final : public CachePolicy {
 public:
  explicit ProposedPolicy(std::shared_ptr<const ReplacementPolicy> policy);

  std::string name() const override { return "proposed"; }
  std::size_t cache_size() const override { return policy_->states().cache_size(); }
  void reset(const CacheState& initial) override;
  RequestOutcome request(ContentId k, Rng& rng) override;
  const CacheState& state() const override { return policy_->states().state(current_); }

  std::size_t state_index() const { return current_; }
  const ReplacementPolicy& policy() const { return *policy_; }

 private:
  std::shared_ptr<const ReplacementPolicy> policy_;
  std::vector<char> cacheable_;  // by content id
  std::size_t current_ = 0;
};

/// Never replaces.
class StaticPolicy final : public CachePolicy {
 public:
  explicit StaticPolicy(std::size_t cache_size) : c_(cache_size) {}

  std::string name() const override { return "static"; }
  std::size_t cache_size() const override { return c_; }
  void reset(const CacheState& initial) override;
  RequestOutcome request(ContentId k, Rng& rng) override;
  const CacheState& state() const override { return state_; }

 private:
  std::size_t c_;
  CacheState state_;
};

/// Always inserts on a miss. LRU evicts the least recently requested content;
/// LFU evicts the least frequently requested one, ties to the least recent.
/// Request counts cover every request of the run, cached or not.
class RecencyFrequencyPolicy final : public CachePolicy {
 public:
  enum class Kind { Lru, Lfu };
  RecencyFrequencyPolicy(Kind kind, std::size_t cache_size) : kind_(kind), c_(cache_size) {}

  std::string name() const override { return kind_ == Kind::Lru ? "lru" : "lfu"; }
  std::size_t cache_size() const override { return c_; }
  void reset(const CacheState& initial) override;
  RequestOutcome request(ContentId k, Rng& rng) override;
  const CacheState& state() const override { return state_; }

 private:
  void touch(ContentId k);

  Kind kind_;
  std::size_t c_;
  CacheState state_;
  std::uint64_t clock_ = 0;
  std::vector<std::uint64_t> last_use_;  // by content id
  std::vector<std::uint64_t> count_;
};

std::unique_ptr<CachePolicy> make_lru(std::size_t cache_size);
std::unique_ptr<CachePolicy> make_lfu(std::size_t cache_size);

/// Draw a starting state from eta over `states` (inverse CDF).
CacheState draw_initial_state(const StateSet& states, std::span<const double> eta, Rng& rng);

struct RunOptions {
  /// Hit-ratio series: request indices where windows start, plus the trace
  /// length at the end. Empty means one window over the whole trace.
  std::vector<std::size_t> series_boundaries;
  /// When set, the state after every request is located in this set to
  /// build the trailing occupancy histogram.
  const StateSet* occupancy_states = nullptr;
  std::size_t occupancy_window = 10'000;
  /// With occupancy_states and target_eta set, ||eta_hat - eta*||^2 over the
  /// trailing window is recorded every checkpoint_every requests.
  std::vector<double> target_eta;
  std::size_t checkpoint_every = 0;
};

struct SeriesPoint {
  std::size_t requests = 0;
  std::size_t hits = 0;
  double hit_ratio() const { return requests ? static_cast<double>(hits) / static_cast<double>(requests) : 0.0; }
};

struct Checkpoint {
  std::size_t request = 0;  // requests processed so far
  double squared_distance = 0.0;
};

struct SimulationResult {
  std::string policy;
  std::uint64_t seed = 0;
  std::size_t requests = 0;
  std::size_t hits = 0;
  std::size_t misses = 0;  // every miss is a download
  std::size_t replacements = 0;
  std::size_t uncacheable = 0;  // subset of misses
  std::vector<SeriesPoint> series;
  /// Trailing-window occupancy counts over RunOptions::occupancy_states.
  std::vector<std::size_t> occupancy;
  std::size_t occupancy_outside = 0;  // window samples in states not in the set
  std::vector<Checkpoint> checkpoints;

  double hit_ratio() const { return requests ? static_cast<double>(hits) / static_cast<double>(requests) : 0.0; }
};

/// Feed every request of the trace to the policy, starting from `initial`.
SimulationResult run(CachePolicy& policy, const RequestTrace& trace, const CacheState& initial,
                     std::uint64_t seed, const RunOptions& options = {});

/// Normalized trailing-window occupancy. Mass spent outside the set is
/// dropped, so the result sums to the in-set fraction.
StateDistribution empirical_state_distribution(const SimulationResult& result);

double squared_distance(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Batches

/// Everything one policy needs for a run: a fresh instance and its start.
struct PolicySetup {
  std::unique_ptr<CachePolicy> policy;
  CacheState initial;
};

struct PolicyEntry {
  std::string name;
  /// Built per run from that run's trace and a dedicated random stream.
  std::function<PolicySetup(const RequestTrace&, Rng&)> make;
};

struct Summary {
  double mean = 0.0;
  double ci95 = 0.0;  // half-width, normal approximation
};

struct ComparisonRow {
  std::string policy;
  std::size_t runs = 0;
  Summary hit_ratio;
  Summary replacements;
  std::vector<SimulationResult> results;  // by run
};

struct CompareOptions {
  std::size_t n_runs = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: hardware concurrency
  RunOptions run;
};

/// Run stream r uses splitmix64(seed + r); the trace seed and the policy
/// seed are derived from it, so equal entries produce equal rows.
std::vector<ComparisonRow> compare(const std::vector<PolicyEntry>& policies,
                                   const std::function<RequestTrace(std::size_t, std::uint64_t)>& make_trace,
                                   const CompareOptions& options);

std::uint64_t splitmix64(std::uint64_t x);
/// Seed handed to make_trace for run r.
std::uint64_t run_trace_seed(std::uint64_t seed, std::size_t run);
Summary summarize(std::span<const double> values);

}  // namespace dpc
