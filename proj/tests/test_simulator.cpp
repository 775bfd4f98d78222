#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>

#include "dpc/errors.hpp"
#include "dpc/placement.hpp"
#include "dpc/policy.hpp"
#include "dpc/simulator.hpp"
#include "dpc/workload.hpp"

using namespace dpc;

namespace {

struct Instance {
  ContentCatalog catalog;
  StateSpace space;
  ChainInput input;
  CompiledChain chain;
  std::shared_ptr<const ReplacementPolicy> policy;
};

Instance zipf_instance(std::size_t n, std::size_t c, double s) {
  auto catalog = ContentCatalog::zipf(n, s);
  auto space = StateSpace::enumerate(n, c);
  const auto target = PlacementTarget::capped_proportional(catalog, c);
  const auto eta = solve_eta(target, space);
  auto input = ChainInput::from_distribution(space, eta, catalog);
  auto chain = compile_chain(input);
  auto policy = std::make_shared<const ReplacementPolicy>(chain.policy);
  return {std::move(catalog), std::move(space), std::move(input), std::move(chain), std::move(policy)};
}

RequestTrace fixed_trace(std::size_t n_contents, std::vector<ContentId> ids) {
  RequestTrace t{n_contents, 100.0, {}};
  for (std::size_t i = 0; i < ids.size(); ++i) t.requests.push_back({static_cast<double>(i), ids[i]});
  return t;
}

}  // namespace

TEST_CASE("static policy on cached contents only hits") {
  StaticPolicy p(3);
  const auto t = fixed_trace(10, {1, 4, 7, 7, 4, 1, 1});
  const auto r = run(p, t, CacheState{{1, 4, 7}}, 1);
  CHECK(r.hits == 7);
  CHECK(r.hit_ratio() == 1.0);
  CHECK(r.replacements == 0);
  CHECK(r.misses == 0);
}

TEST_CASE("static policy occupancy is a point mass on the initial state") {
  const auto space = StateSpace::enumerate(5, 2);
  const auto all = StateSet::all_of(space);
  StaticPolicy p(2);
  RunOptions opt;
  opt.occupancy_states = &all;
  opt.occupancy_window = 50;
  const auto r = run(p, gen_static_zipf(5, 0.8, 500, 2), CacheState{{2, 4}}, 3, opt);
  const auto eta = empirical_state_distribution(r);
  for (std::size_t l = 0; l < all.size(); ++l) CHECK(eta.probs[l] == (l == *all.find(std::vector<ContentId>{2, 4}) ? 1.0 : 0.0));
  CHECK(r.misses + r.hits == 500);
}

TEST_CASE("static caching of 2 among 23 equally popular contents hits 2/23") {
  const std::vector<double> uniform(23, 1.0 / 23);
  const auto sched = random_fluctuation_schedule(uniform, 50, 1.0, 1.0, 4);
  const std::size_t draws = 400000;
  const auto t = gen_session_varying(sched, draws, 5);
  StaticPolicy p(2);
  const auto r = run(p, t, CacheState{{1, 2}}, 6);
  // Per-session hit probabilities vary, the overall mean is exactly 2/23.
  double var = 0.0;
  for (const auto& phi : sched.sessions) {
    const double h = phi[0] + phi[1];
    var += 8000.0 * h * (1.0 - h);
  }
  CHECK(std::abs(static_cast<double>(r.hits) - draws * 2.0 / 23.0) <= 4.0 * std::sqrt(var));
}

TEST_CASE("LRU evicts the least recently requested content") {
  auto p = make_lru(2);
  const auto t = fixed_trace(5, {1, 3, 2, 1, 1});
  Rng rng(0);
  p->reset(CacheState{{1, 2}});
  CHECK(p->request(1, rng).hit);
  auto o = p->request(3, rng);  // 2 is older than 1
  CHECK((!o.hit && o.replaced));
  CHECK(p->state().contents == std::vector<ContentId>{1, 3});
  p->request(2, rng);  // 1 is older than 3
  CHECK(p->state().contents == std::vector<ContentId>{2, 3});
  const auto r = run(*p, t, CacheState{{1, 2}}, 0);
  // hit, evict 2, evict 1, evict 3, hit
  CHECK(r.hits == 2);
  CHECK(r.replacements == 3);
}

TEST_CASE("LFU evicts the least frequent, ties to the least recent") {
  auto p = make_lfu(2);
  Rng rng(0);
  p->reset(CacheState{{1, 2}});
  p->request(2, rng);
  p->request(2, rng);
  p->request(1, rng);
  p->request(3, rng);  // counts 1:1, 2:2
  CHECK(p->state().contents == std::vector<ContentId>{2, 3});
  p->request(4, rng);  // 3 has one request, 2 has two
  CHECK(p->state().contents == std::vector<ContentId>{2, 4});
  p->request(1, rng);  // 1 now has 2 requests; 4:1 is least frequent
  CHECK(p->state().contents == std::vector<ContentId>{1, 2});
  p->request(5, rng);  // 1:2 and 2:2 tie, 2 is less recent
  CHECK(p->state().contents == std::vector<ContentId>{1, 5});
}

TEST_CASE("request counts persist across evictions in LFU") {
  auto p = make_lfu(2);
  Rng rng(0);
  p->reset(CacheState{{1, 2}});
  for (ContentId k : {3, 3, 3, 4, 5, 4, 4, 4, 6}) p->request(k, rng);
  CHECK(p->state().contents == std::vector<ContentId>{4, 6});  // 3 evicted with 3 requests
  p->request(3, rng);  // back with 4 requests, evicts 6
  CHECK(p->state().contents == std::vector<ContentId>{3, 4});
  // 3 and 4 both have 4 requests; a reset count for 3 would evict it here.
  p->request(7, rng);
  CHECK(p->state().contents == std::vector<ContentId>{3, 7});
}

TEST_CASE("proposed policy follows Theta one step at a time") {
  // Under i.i.d. requests from phi the visited states form a Markov chain
  // with kernel Theta. Compare empirical transition frequencies per column.
  auto inst = zipf_instance(5, 2, 0.8);
  ProposedPolicy p(inst.policy);
  const auto& states = inst.policy->states();
  const std::size_t n = states.size();
  Rng rng(7);
  std::discrete_distribution<std::size_t> pick(inst.input.phi.begin(), inst.input.phi.end());
  std::vector<std::vector<double>> counts(n, std::vector<double>(n, 0.0));
  std::vector<double> visits(n, 0.0);
  p.reset(states.state(0));
  for (std::size_t i = 0; i < 400000; ++i) {
    const auto from = p.state_index();
    p.request(static_cast<ContentId>(pick(rng) + 1), rng);
    counts[p.state_index()][from] += 1.0;
    visits[from] += 1.0;
  }
  for (std::size_t m = 0; m < n; ++m) {
    REQUIRE(visits[m] > 1000.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double pr = inst.chain.theta.get(j, m);
      const double sd = std::sqrt(visits[m] * pr * (1.0 - pr));
      INFO("column " << m << " row " << j);
      CHECK(std::abs(counts[j][m] - visits[m] * pr) <= 4.5 * sd + 1e-9);
    }
  }
}

TEST_CASE("proposed policy occupancy converges toward eta*") {
  auto inst = zipf_instance(5, 2, 0.8);
  ProposedPolicy p(inst.policy);
  const std::size_t draws = 300000;
  const auto t = gen_static_zipf(5, 0.8, draws, 8);
  RunOptions opt;
  opt.occupancy_states = &inst.policy->states();
  opt.occupancy_window = draws;
  opt.target_eta = inst.input.eta;
  opt.checkpoint_every = draws / 10;
  Rng rng(9);
  const auto init = draw_initial_state(inst.policy->states(), inst.input.eta, rng);
  const auto r = run(p, t, init, 10, opt);
  const auto eta_hat = empirical_state_distribution(r);
  const double d = squared_distance(eta_hat.probs, inst.input.eta);
  MESSAGE("||eta_hat - eta*||^2 = " << d);
  CHECK(d < 1e-3);
  REQUIRE(r.checkpoints.size() == 10);
  CHECK(r.checkpoints.back().squared_distance == doctest::Approx(d));
  CHECK(r.replacements <= r.misses);
  CHECK(r.uncacheable == 0);
}

TEST_CASE("contents outside a truncated state set are pass-through misses") {
  auto catalog = ContentCatalog::zipf(8, 1.0);
  const auto kept = top_states_by_popularity(catalog, std::vector<ContentId>{1, 2, 3, 4, 5}, 2, 6);
  StateSet set(8, 2, kept);
  std::vector<double> eta(set.size());
  for (std::size_t l = 0; l < set.size(); ++l) eta[l] = state_popularity(catalog, set.state(l));
  double sum = 0.0;
  for (double v : eta) sum += v;
  for (double& v : eta) v /= sum;
  const auto input = ChainInput::from_states(set, eta, catalog);
  const auto chain = compile_chain(input);
  ProposedPolicy p(std::make_shared<const ReplacementPolicy>(chain.policy));
  const auto t = gen_static_zipf(8, 0.3, 20000, 11);
  const auto r = run(p, t, set.state(0), 12);
  std::size_t outside = 0;
  const auto in_union = set.content_union();
  for (const auto& q : t.requests)
    if (!std::binary_search(in_union.begin(), in_union.end(), q.content)) ++outside;
  CHECK(outside > 0);
  CHECK(r.uncacheable == outside);
  CHECK(r.hits + r.misses == t.size());
}

TEST_CASE("runs are deterministic and counters consistent") {
  auto inst = zipf_instance(6, 3, 0.8);
  const auto t = gen_static_zipf(6, 0.8, 20000, 13);
  const auto init = inst.policy->states().state(0);
  RunOptions opt;
  opt.series_boundaries = session_boundaries(7, t.size());
  ProposedPolicy a(inst.policy), b(inst.policy);
  const auto ra = run(a, t, init, 14, opt);
  const auto rb = run(b, t, init, 14, opt);
  CHECK(ra.hits == rb.hits);
  CHECK(ra.replacements == rb.replacements);
  REQUIRE(ra.series.size() == 7);
  std::size_t hits = 0, reqs = 0;
  for (const auto& s : ra.series) {
    hits += s.hits;
    reqs += s.requests;
  }
  CHECK(hits == ra.hits);
  CHECK(reqs == t.size());
  const auto rc = run(a, t, init, 15, opt);
  CHECK((rc.hits != ra.hits || rc.replacements != ra.replacements));
}

TEST_CASE("empty trace gives an empty result") {
  StaticPolicy p(2);
  const RequestTrace t{5, 100.0, {}};
  const auto r = run(p, t, CacheState{{1, 2}}, 0);
  CHECK(r.requests == 0);
  CHECK(r.hits == 0);
  CHECK(r.series.empty());
  CHECK(r.hit_ratio() == 0.0);
}

TEST_CASE("invalid initial states are rejected") {
  StaticPolicy p(2);
  const RequestTrace t{5, 100.0, {}};
  CHECK_THROWS_AS(run(p, t, CacheState{{1}}, 0), InvalidArgument);
  CHECK_THROWS_AS(run(p, t, CacheState{{2, 1}}, 0), InvalidArgument);
  auto inst = zipf_instance(5, 2, 0.8);
  ProposedPolicy q(inst.policy);
  CHECK_THROWS_AS(run(q, t, CacheState{{1, 2, 3}}, 0), InvalidArgument);
}

TEST_CASE("compare: equal entries give equal rows, thread count does not matter") {
  auto inst = zipf_instance(5, 2, 0.8);
  auto proposed = [&](const RequestTrace&, Rng& rng) {
    return PolicySetup{std::make_unique<ProposedPolicy>(inst.policy),
                       draw_initial_state(inst.policy->states(), inst.input.eta, rng)};
  };
  auto lru = [](const RequestTrace&, Rng&) { return PolicySetup{make_lru(2), CacheState{{1, 2}}}; };
  const std::vector<PolicyEntry> entries{{"a", proposed}, {"b", proposed}, {"lru", lru}};
  auto make_trace = [](std::size_t, std::uint64_t seed) { return gen_static_zipf(5, 0.8, 5000, seed); };
  CompareOptions opt;
  opt.n_runs = 12;
  opt.seed = 99;
  opt.threads = 1;
  const auto one = compare(entries, make_trace, opt);
  opt.threads = 4;
  const auto four = compare(entries, make_trace, opt);
  REQUIRE(one.size() == 3);
  CHECK(one[0].hit_ratio.mean == one[1].hit_ratio.mean);
  CHECK(one[0].replacements.mean == one[1].replacements.mean);
  for (std::size_t p = 0; p < 3; ++p) {
    CHECK(one[p].hit_ratio.mean == four[p].hit_ratio.mean);
    CHECK(one[p].hit_ratio.ci95 == four[p].hit_ratio.ci95);
    for (std::size_t r = 0; r < 12; ++r) CHECK(one[p].results[r].hits == four[p].results[r].hits);
  }
  CHECK(one[0].hit_ratio.ci95 > 0.0);
  // Different runs see different traces.
  CHECK(one[2].results[0].hits != one[2].results[1].hits);
}

TEST_CASE("compare propagates errors from workers") {
  auto bad = [](const RequestTrace&, Rng&) { return PolicySetup{make_lru(2), CacheState{{3}}}; };
  auto make_trace = [](std::size_t, std::uint64_t seed) { return gen_static_zipf(5, 0.8, 100, seed); };
  CompareOptions opt;
  opt.n_runs = 4;
  CHECK_THROWS_AS(compare({{"bad", bad}}, make_trace, opt), InvalidArgument);
}

TEST_CASE("summary statistics") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto s = summarize(v);
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.ci95 == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(summarize(std::vector<double>{7.0}).ci95 == 0.0);
  CHECK(splitmix64(0) != splitmix64(1));
}
