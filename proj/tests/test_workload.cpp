#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "dpc/errors.hpp"
#include "dpc/workload.hpp"

using namespace dpc;

namespace {

std::vector<double> counts_of(const RequestTrace& t) {
  std::vector<double> c(t.n_contents, 0.0);
  for (const auto& r : t.requests) c[r.content - 1] += 1.0;
  return c;
}

// Every count within z standard deviations of its multinomial mean.
void check_multinomial(const std::vector<double>& counts, std::span<const double> phi, double n, double z = 3.0) {
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const double sd = std::sqrt(n * phi[k] * (1.0 - phi[k]));
    INFO("content " << k + 1);
    CHECK(std::abs(counts[k] - n * phi[k]) <= z * sd + 1e-9);
  }
}

double tv(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace

TEST_CASE("steep Zipf puts almost everything on content 1") {
  const auto t = gen_static_zipf(20, 50.0, 10000, 1);
  const auto c = counts_of(t);
  CHECK(c[0] == 10000.0);
}

TEST_CASE("s = 0 is uniform") {
  const std::size_t n = 12, draws = 120000;
  const auto t = gen_static_zipf(n, 0.0, draws, 2);
  const std::vector<double> phi(n, 1.0 / n);
  check_multinomial(counts_of(t), phi, draws);
}

TEST_CASE("Zipf(15, 0.8) frequencies match k^-0.8 over 1e6 requests") {
  const std::size_t draws = 1'000'000;
  const auto t = gen_static_zipf(15, 0.8, draws, 3);
  const auto cat = ContentCatalog::zipf(15, 0.8);
  check_multinomial(counts_of(t), cat.popularity(), draws, 3.5);
  CHECK(t.size() == draws);
  t.validate();
  CHECK(t.requests.back().time < 100.0);
}

TEST_CASE("traces are deterministic in the seed") {
  CHECK(gen_static_zipf(30, 0.8, 5000, 9).requests == gen_static_zipf(30, 0.8, 5000, 9).requests);
  CHECK(gen_static_zipf(30, 0.8, 5000, 9).requests != gen_static_zipf(30, 0.8, 5000, 10).requests);
  ShotNoiseConfig cfg;
  cfg.mean_total_requests = 2000;
  CHECK(gen_shot_noise(cfg, 500, 4).requests == gen_shot_noise(cfg, 500, 4).requests);
}

TEST_CASE("a single session reduces to the static generator") {
  const auto cat = ContentCatalog::zipf(10, 0.7);
  SessionSchedule s;
  s.sessions = {std::vector<double>(cat.popularity().begin(), cat.popularity().end())};
  CHECK(gen_session_varying(s, 20000, 5).requests == gen_from_popularity(cat.popularity(), 20000, 5).requests);
}

TEST_CASE("session boundaries split requests evenly") {
  const auto b = session_boundaries(50, 2'000'000);
  REQUIRE(b.size() == 51);
  for (std::size_t q = 0; q < 50; ++q) CHECK(b[q + 1] - b[q] == 40000);
  const auto odd = session_boundaries(3, 10);
  CHECK(odd == std::vector<std::size_t>{0, 3, 6, 10});
}

TEST_CASE("random fluctuation keeps the declared average") {
  const std::vector<double> uniform(23, 1.0 / 23);
  const auto s = random_fluctuation_schedule(uniform, 50, 1.0, 1.0, 7);
  CHECK(s.n_sessions() == 50);
  s.validate(uniform);
  // Sessions really vary.
  double spread = 0.0;
  for (const auto& phi : s.sessions) spread = std::max(spread, tv(phi, uniform));
  CHECK(spread > 0.1);

  const auto zipf = ContentCatalog::zipf(8, 1.0);
  const auto z = random_fluctuation_schedule(zipf.popularity(), 20, 5.0, 0.5, 8);
  z.validate(zipf.popularity());
  CHECK_THROWS_AS(random_fluctuation_schedule(uniform, 0, 1.0, 1.0, 1), InvalidArgument);
}

TEST_CASE("23 equally popular contents over 50 sessions average to 1/23") {
  const std::vector<double> uniform(23, 1.0 / 23);
  const std::size_t draws = 2'000'000;
  for (auto mode : {VariationMode::RandomFluctuation, VariationMode::SmoothChange}) {
    const auto s = mode == VariationMode::SmoothChange ? smooth_change_schedule(23, 50, 2.0, 1.0)
                                                       : random_fluctuation_schedule(uniform, 50, 1.0, 1.0, 11);
    s.validate(uniform);
    const auto t = gen_session_varying(s, draws, 12);
    // Per-session draws are independent, so the overall count has variance
    // sum_q n_q phi_q (1 - phi_q), which is at most the multinomial bound.
    // 46 checks in total, so z = 4 keeps the family-wise level at 3 sigma.
    const auto c = counts_of(t);
    for (std::size_t k = 0; k < 23; ++k) {
      double var = 0.0;
      for (const auto& phi : s.sessions) var += 40000.0 * phi[k] * (1.0 - phi[k]);
      CHECK(std::abs(c[k] - draws / 23.0) <= 4.0 * std::sqrt(var));
    }
  }
}

TEST_CASE("smooth change respects its adjacent-session TV bound") {
  for (double kappa : {0.5, 2.0, 8.0}) {
    for (std::size_t q : {10, 50, 200}) {
      const auto s = smooth_change_schedule(23, q, kappa, 1.0);
      s.validate(std::vector<double>(23, 1.0 / 23));
      double worst = 0.0;
      for (std::size_t i = 1; i < s.n_sessions(); ++i) worst = std::max(worst, tv(s.sessions[i], s.sessions[i - 1]));
      CHECK(worst <= s.adjacent_tv_bound + 1e-12);
      CHECK(worst > 0.0);
    }
  }
  // Finer sessions change more slowly.
  CHECK(smooth_change_schedule(23, 200, 2.0, 1.0).adjacent_tv_bound <
        smooth_change_schedule(23, 20, 2.0, 1.0).adjacent_tv_bound);
}

TEST_CASE("one session of a session trace recovers that session's popularity") {
  const std::vector<double> uniform(6, 1.0 / 6);
  const auto s = random_fluctuation_schedule(uniform, 4, 2.0, 1.0, 21);
  const std::size_t draws = 400000;
  const auto t = gen_session_varying(s, draws, 22);
  const auto b = session_boundaries(4, draws);
  for (std::size_t q = 0; q < 4; ++q) {
    const auto emp = empirical_popularity_range(t, b[q], b[q + 1]);
    const double n = static_cast<double>(b[q + 1] - b[q]);
    std::vector<double> counts(emp.size());
    for (std::size_t k = 0; k < emp.size(); ++k) counts[k] = emp[k] * n;
    check_multinomial(counts, s.sessions[q], n, 3.5);
  }
}

TEST_CASE("shot noise: calibrated top-100 lifetime is near 32.7 minutes") {
  const std::size_t n = 10000;
  const auto cfg = calibrate_decay(ShotNoiseConfig{}, n, 32.7);
  CHECK(expected_top_lifetime(cfg, n) == doctest::Approx(32.7).epsilon(1e-9));
  const auto t = gen_shot_noise(cfg, n, 31);
  t.validate();
  const auto life = content_lifetimes(t);
  double sum = 0.0;
  for (std::size_t k = 0; k < 100; ++k) {
    REQUIRE(life[k].has_value());
    sum += *life[k];
  }
  const double mean = sum / 100.0;
  MESSAGE("top-100 mean lifetime " << mean << " with decay " << cfg.decay);
  CHECK(std::abs(mean - 32.7) <= 0.1 * 32.7);

  // Nearly all requests fall inside the 100-minute window.
  const auto inside = std::count_if(t.requests.begin(), t.requests.end(),
                                    [](const Request& r) { return r.time >= 0.0 && r.time <= 100.0; });
  CHECK(static_cast<double>(inside) >= 0.99 * static_cast<double>(t.size()));

  // Poisson superposition: the total has mean and variance sum of the means.
  const double mu = cfg.mean_total_requests;
  CHECK(std::abs(static_cast<double>(t.size()) - mu) <= 3.0 * std::sqrt(mu));
}

TEST_CASE("shot noise mean counts follow Zipf") {
  ShotNoiseConfig cfg;
  double total = 0.0;
  for (ContentId k = 1; k <= 100; ++k) total += cfg.mean_count(100, k);
  CHECK(total == doctest::Approx(cfg.mean_total_requests));
  CHECK(cfg.mean_count(100, 1) / cfg.mean_count(100, 10) == doctest::Approx(std::pow(10.0, 0.8)));
}

TEST_CASE("short pulses collapse onto the first-request time") {
  ShotNoiseConfig cfg;
  cfg.decay = 1e-4;
  cfg.mean_total_requests = 5000;
  const auto t = gen_shot_noise(cfg, 50, 41);
  for (const auto& l : content_lifetimes(t))
    if (l) CHECK(*l <= cfg.pulse_length * cfg.decay);
  for (const auto& r : t.requests) CHECK(r.time <= cfg.first_request_window + cfg.pulse_length * cfg.decay);
}

TEST_CASE("shot noise config validation") {
  ShotNoiseConfig bad;
  bad.decay = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_THROWS_AS(calibrate_decay(ShotNoiseConfig{}, 100, -1.0), InvalidArgument);
}

TEST_CASE("empirical popularity") {
  RequestTrace single{4, 10.0, {{1.0, 3}, {2.0, 3}, {5.0, 3}}};
  CHECK(empirical_popularity(single, 0.0, 10.0) == std::vector<double>{0, 0, 1, 0});
  CHECK_THROWS_AS(empirical_popularity(single, 6.0, 10.0), InvalidArgument);
  CHECK(empirical_popularity(single, 2.0, 5.0) == std::vector<double>{0, 0, 1, 0});

  const auto t = gen_static_zipf(10, 1.0, 200000, 51);
  const auto emp = empirical_popularity(t, 0.0, 100.0);
  const auto cat = ContentCatalog::zipf(10, 1.0);
  std::vector<double> counts(10);
  for (std::size_t k = 0; k < 10; ++k) counts[k] = emp[k] * 200000.0;
  check_multinomial(counts, cat.popularity(), 200000.0, 3.5);
}

TEST_CASE("trace CSV round trip") {
  ShotNoiseConfig cfg;
  cfg.mean_total_requests = 1000;
  const auto t = gen_shot_noise(cfg, 40, 61);
  std::stringstream ss;
  write_trace_csv(ss, t);
  CHECK(ss.str().rfind("timestamp_min,content_id\n", 0) == 0);
  const auto back = read_trace_csv(ss, 40, cfg.horizon);
  CHECK(back.requests == t.requests);

  std::stringstream bad("timestamp_min,content_id\n1.0,99\n");
  CHECK_THROWS_AS(read_trace_csv(bad, 40, 100.0), InvalidArgument);
  std::stringstream unordered("timestamp_min,content_id\n2.0,1\n1.0,1\n");
  CHECK_THROWS_AS(read_trace_csv(unordered, 40, 100.0), InvalidArgument);
}
