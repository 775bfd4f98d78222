#include "dpc/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "dpc/errors.hpp"

namespace dpc {

namespace {

__extension__ using u128 = unsigned __int128;

void check_distribution(std::span<const double> phi, const char* what) {
  if (phi.empty()) throw InvalidArgument(std::string(what) + " is empty");
  double sum = 0.0;
  for (double v : phi) {
    if (!(v >= 0.0)) throw InvalidArgument(std::string(what) + " has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument(std::string(what) + " must sum to 1");
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

// Largest t in [0, cap] with base + t * dir >= 0 everywhere.
double feasible_scale(std::span<const double> base, std::span<const double> dir, double cap) {
  double t = cap;
  for (std::size_t i = 0; i < base.size(); ++i)
    if (dir[i] < 0.0) t = std::min(t, base[i] / -dir[i]);
  return std::max(t, 0.0);
}

SessionSchedule recenter(VariationMode mode, std::span<const double> average,
                         std::vector<std::vector<double>> raw, double magnitude) {
  const std::size_t q_count = raw.size(), n = average.size();
  std::vector<double> mean(n, 0.0);
  for (const auto& d : raw)
    for (std::size_t k = 0; k < n; ++k) mean[k] += d[k] / static_cast<double>(q_count);
  double lambda = magnitude;
  for (auto& d : raw) {
    for (std::size_t k = 0; k < n; ++k) d[k] -= mean[k];
    lambda = feasible_scale(average, d, lambda);
  }
  SessionSchedule s;
  s.mode = mode;
  for (const auto& d : raw) {
    std::vector<double> phi(n);
    for (std::size_t k = 0; k < n; ++k) phi[k] = std::max(0.0, average[k] + lambda * d[k]);
    s.sessions.push_back(std::move(phi));
  }
  double worst = 0.0;
  for (std::size_t q = 1; q < q_count; ++q)
    worst = std::max(worst, total_variation(raw[q], raw[q - 1]));
  s.adjacent_tv_bound = lambda * worst;
  return s;
}

}  // namespace

void RequestTrace::validate() const {
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& r : requests) {
    if (r.content < 1 || r.content > n_contents) throw InvalidArgument("request for an unknown content");
    if (!(r.time >= last)) throw InvalidArgument("request timestamps must be non-decreasing");
    last = r.time;
  }
}

RequestTrace gen_from_popularity(std::span<const double> phi, std::size_t n_requests,
                                 std::uint64_t seed, double horizon) {
  check_distribution(phi, "popularity");
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(phi.begin(), phi.end());
  RequestTrace t{phi.size(), horizon, {}};
  t.requests.reserve(n_requests);
  const double step = n_requests ? horizon / static_cast<double>(n_requests) : 0.0;
  for (std::size_t i = 0; i < n_requests; ++i)
    t.requests.push_back({static_cast<double>(i) * step, static_cast<ContentId>(pick(rng) + 1)});
  return t;
}

RequestTrace gen_static_zipf(std::size_t n_contents, double s, std::size_t n_requests,
                             std::uint64_t seed, double horizon) {
  if (!(s >= 0.0)) throw InvalidArgument("Zipf exponent must be non-negative");
  const auto cat = ContentCatalog::zipf(n_contents, s);
  return gen_from_popularity(cat.popularity(), n_requests, seed, horizon);
}

// ---------------------------------------------------------------------------
// Sessions

std::vector<double> SessionSchedule::average() const {
  std::vector<double> mean(n_contents(), 0.0);
  for (const auto& phi : sessions)
    for (std::size_t k = 0; k < phi.size(); ++k) mean[k] += phi[k];
  for (auto& v : mean) v /= static_cast<double>(sessions.size());
  return mean;
}

void SessionSchedule::validate(std::span<const double> declared) const {
  if (sessions.empty()) throw InvalidArgument("schedule has no sessions");
  for (const auto& phi : sessions) {
    if (phi.size() != n_contents()) throw InvalidArgument("sessions differ in catalog size");
    check_distribution(phi, "session popularity");
  }
  if (!declared.empty()) {
    if (declared.size() != n_contents()) throw InvalidArgument("declared average has the wrong length");
    const auto mean = average();
    for (std::size_t k = 0; k < mean.size(); ++k)
      if (std::abs(mean[k] - declared[k]) > 1e-9)
        throw InvalidArgument("session mean differs from the declared average");
  }
}

SessionSchedule random_fluctuation_schedule(std::span<const double> average, std::size_t n_sessions,
                                            double concentration, double magnitude,
                                            std::uint64_t seed) {
  check_distribution(average, "average popularity");
  if (n_sessions == 0) throw InvalidArgument("at least one session is required");
  if (!(concentration > 0.0) || !(magnitude >= 0.0))
    throw InvalidArgument("concentration must be positive and magnitude non-negative");
  std::mt19937_64 rng(seed);
  const std::size_t n = average.size();
  std::vector<std::vector<double>> raw(n_sessions, std::vector<double>(n, 0.0));
  for (auto& d : raw) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double alpha = concentration * static_cast<double>(n) * average[k];
      d[k] = alpha > 0.0 ? std::gamma_distribution<double>(alpha, 1.0)(rng) : 0.0;
      sum += d[k];
    }
    if (sum > 0.0)
      for (auto& v : d) v /= sum;
    else
      d.assign(average.begin(), average.end());
  }
  return recenter(VariationMode::RandomFluctuation, average, std::move(raw), magnitude);
}

SessionSchedule smooth_change_schedule(std::size_t n_contents, std::size_t n_sessions, double kappa,
                                       double magnitude, double laps) {
  if (n_contents == 0 || n_sessions == 0) throw InvalidArgument("empty catalog or schedule");
  if (!(kappa >= 0.0) || !(magnitude >= 0.0)) throw InvalidArgument("kappa and magnitude must be non-negative");
  const std::size_t n = n_contents;
  std::vector<double> bump(n);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    sum += (bump[j] = std::exp(kappa * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n))));
  for (auto& v : bump) v /= sum;

  // Linear interpolation between integer rotations.
  auto rotated = [&](double shift) {
    const double x = std::fmod(shift, static_cast<double>(n));
    const auto whole = static_cast<std::size_t>(std::floor(x));
    const double frac = x - std::floor(x);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = bump[(k + n - whole % n) % n];
      const double b = bump[(k + 2 * n - whole % n - 1) % n];
      out[k] = (1.0 - frac) * a + frac * b;
    }
    return out;
  };
  std::vector<std::vector<double>> raw;
  const double step = laps * static_cast<double>(n) / static_cast<double>(n_sessions);
  for (std::size_t q = 0; q < n_sessions; ++q) raw.push_back(rotated(step * static_cast<double>(q)));
  const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  return recenter(VariationMode::SmoothChange, uniform, std::move(raw), magnitude);
}

std::vector<std::size_t> session_boundaries(std::size_t n_sessions, std::size_t n_requests) {
  std::vector<std::size_t> b(n_sessions + 1);
  for (std::size_t q = 0; q <= n_sessions; ++q)
    b[q] = static_cast<std::size_t>((static_cast<u128>(q) * n_requests) / n_sessions);
  return b;
}

RequestTrace gen_session_varying(const SessionSchedule& schedule, std::size_t n_requests,
                                 std::uint64_t seed, double horizon) {
  schedule.validate();
  std::mt19937_64 rng(seed);
  RequestTrace t{schedule.n_contents(), horizon, {}};
  t.requests.reserve(n_requests);
  const auto bounds = session_boundaries(schedule.n_sessions(), n_requests);
  const double step = n_requests ? horizon / static_cast<double>(n_requests) : 0.0;
  for (std::size_t q = 0; q < schedule.n_sessions(); ++q) {
    const auto& phi = schedule.sessions[q];
    std::discrete_distribution<std::size_t> pick(phi.begin(), phi.end());
    for (std::size_t i = bounds[q]; i < bounds[q + 1]; ++i)
      t.requests.push_back({static_cast<double>(i) * step, static_cast<ContentId>(pick(rng) + 1)});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Shot noise

void ShotNoiseConfig::validate() const {
  if (!(zipf_s >= 0.0)) throw InvalidArgument("Zipf exponent must be non-negative");
  if (!(mean_total_requests >= 0.0)) throw InvalidArgument("mean request total must be non-negative");
  if (!(first_request_window >= 0.0) || !(horizon > 0.0)) throw InvalidArgument("invalid time window");
  if (!(decay > 0.0) || !(pulse_length > 0.0)) throw InvalidArgument("decay and pulse length must be positive");
}

double ShotNoiseConfig::mean_count(std::size_t n_contents, ContentId k) const {
  double h = 0.0;
  for (std::size_t j = 1; j <= n_contents; ++j) h += std::pow(static_cast<double>(j), -zipf_s);
  return mean_total_requests * std::pow(static_cast<double>(k), -zipf_s) / h;
}

double expected_top_lifetime(const ShotNoiseConfig& config, std::size_t n_contents, std::size_t top) {
  config.validate();
  top = std::min(top, n_contents);
  if (top == 0) return 0.0;
  double h = 0.0;
  for (std::size_t j = 1; j <= n_contents; ++j) h += std::pow(static_cast<double>(j), -config.zipf_s);
  // Span of n i.i.d. exponentials with mean T is T * H_{n-1} in expectation.
  double total = 0.0;
  for (std::size_t k = 1; k <= top; ++k) {
    const double mu = config.mean_total_requests * std::pow(static_cast<double>(k), -config.zipf_s) / h;
    const double spread = 15.0 * std::sqrt(mu) + 20.0;
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor(mu - spread)));
    const auto hi = static_cast<std::size_t>(std::ceil(mu + spread));
    double harmonic = 0.0;  // H_{n-1}
    for (std::size_t j = 1; j + 1 < std::max<std::size_t>(lo, 1); ++j) harmonic += 1.0 / static_cast<double>(j);
    double expect = 0.0;
    for (std::size_t n = std::max<std::size_t>(lo, 1); n <= hi; ++n) {
      if (n >= 2) harmonic += 1.0 / static_cast<double>(n - 1);
      if (mu <= 0.0) break;
      const double log_pmf = static_cast<double>(n) * std::log(mu) - mu - std::lgamma(static_cast<double>(n) + 1.0);
      expect += std::exp(log_pmf) * harmonic;
    }
    total += config.decay * expect;
  }
  return total / static_cast<double>(top);
}

ShotNoiseConfig calibrate_decay(ShotNoiseConfig config, std::size_t n_contents, double target,
                                std::size_t top) {
  if (!(target > 0.0)) throw InvalidArgument("target lifetime must be positive");
  config.decay = 1.0;
  const double unit = expected_top_lifetime(config, n_contents, top);
  if (!(unit > 0.0)) throw InvalidArgument("top contents expect fewer than two requests; lifetime undefined");
  config.decay = target / unit;
  return config;
}

RequestTrace gen_shot_noise(const ShotNoiseConfig& config, std::size_t n_contents, std::uint64_t seed) {
  config.validate();
  if (n_contents == 0) throw InvalidArgument("catalog must contain at least one content");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double window = config.pulse_length * config.decay;
  const double mass = config.decay * (1.0 - std::exp(-config.pulse_length));

  double h = 0.0;
  for (std::size_t j = 1; j <= n_contents; ++j) h += std::pow(static_cast<double>(j), -config.zipf_s);

  RequestTrace t{n_contents, config.horizon, {}};
  t.requests.reserve(static_cast<std::size_t>(config.mean_total_requests * 1.1) + 16);
  for (ContentId k = 1; k <= n_contents; ++k) {
    const double mu = config.mean_total_requests * std::pow(static_cast<double>(k), -config.zipf_s) / h;
    const double t0 = config.first_request_window * unit(rng);
    const double peak = mu / mass;  // rate at t0
    const auto candidates = std::poisson_distribution<long long>(peak * window)(rng);
    for (long long i = 0; i < candidates; ++i) {
      const double dt = window * unit(rng);
      if (unit(rng) < std::exp(-dt / config.decay)) t.requests.push_back({t0 + dt, k});
    }
  }
  std::stable_sort(t.requests.begin(), t.requests.end(), [](const Request& a, const Request& b) {
    return a.time != b.time ? a.time < b.time : a.content < b.content;
  });
  return t;
}

std::vector<std::optional<double>> content_lifetimes(const RequestTrace& trace) {
  std::vector<std::optional<double>> first(trace.n_contents), last(trace.n_contents);
  for (const auto& r : trace.requests) {
    auto& f = first[r.content - 1];
    if (!f) f = r.time;
    last[r.content - 1] = r.time;
  }
  std::vector<std::optional<double>> out(trace.n_contents);
  for (std::size_t k = 0; k < trace.n_contents; ++k)
    if (first[k]) out[k] = *last[k] - *first[k];
  return out;
}

// ---------------------------------------------------------------------------
// Empirical popularity and CSV

namespace {

std::vector<double> normalized_counts(const RequestTrace& trace, auto begin, auto end) {
  std::vector<double> counts(trace.n_contents, 0.0);
  std::size_t total = 0;
  for (auto it = begin; it != end; ++it) {
    counts[it->content - 1] += 1.0;
    ++total;
  }
  if (total == 0) throw InvalidArgument("empty window");
  for (auto& c : counts) c /= static_cast<double>(total);
  return counts;
}

}  // namespace

std::vector<double> empirical_popularity(const RequestTrace& trace, double t_begin, double t_end) {
  auto lo = std::lower_bound(trace.requests.begin(), trace.requests.end(), t_begin,
                             [](const Request& r, double t) { return r.time < t; });
  auto hi = std::lower_bound(lo, trace.requests.end(), t_end,
                             [](const Request& r, double t) { return r.time < t; });
  return normalized_counts(trace, lo, hi);
}

std::vector<double> empirical_popularity_range(const RequestTrace& trace, std::size_t first,
                                               std::size_t last) {
  if (first > last || last > trace.size()) throw InvalidArgument("request range out of bounds");
  return normalized_counts(trace, trace.requests.begin() + static_cast<std::ptrdiff_t>(first),
                           trace.requests.begin() + static_cast<std::ptrdiff_t>(last));
}

void write_trace_csv(std::ostream& os, const RequestTrace& trace) {
  os << "timestamp_min,content_id\n";
  char buf[64];
  for (const auto& r : trace.requests) {
    auto res = std::to_chars(buf, buf + sizeof buf, r.time);
    os.write(buf, res.ptr - buf);
    os << ',' << r.content << '\n';
  }
}

RequestTrace read_trace_csv(std::istream& is, std::size_t n_contents, double horizon) {
  RequestTrace t{n_contents, horizon, {}};
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "timestamp_min,content_id") throw InvalidArgument("unexpected trace header: " + line);
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidArgument("malformed trace line: " + line);
    Request r{};
    auto a = std::from_chars(line.data(), line.data() + comma, r.time);
    auto b = std::from_chars(line.data() + comma + 1, line.data() + line.size(), r.content);
    if (a.ec != std::errc() || b.ec != std::errc()) throw InvalidArgument("malformed trace line: " + line);
    t.requests.push_back(r);
  }
  t.validate();
  return t;
}

}  // namespace dpc
