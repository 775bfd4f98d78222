#pragma once

// Synthetic request traces: static Zipf, session-varying popularity, and
// shot-noise (per-content decaying request pulses).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dpc/state_space.hpp"

namespace dpc {

struct Request {
  double time;  // minutes
  ContentId content;
  friend bool operator==(const Request&, const Request&) = default;
};

struct RequestTrace {
  std::size_t n_contents = 0;
  double horizon = 0.0;
  std::vector<Request> requests;

  std::size_t size() const { return requests.size(); }
  /// Throws InvalidArgument unless timestamps are non-decreasing and ids valid.
  void validate() const;
};

/// i.i.d. requests from phi, evenly spaced over [0, horizon).
RequestTrace gen_from_popularity(std::span<const double> phi, std::size_t n_requests,
                                 std::uint64_t seed, double horizon = 100.0);

/// i.i.d. requests with Pr{k} proportional to k^-s.
RequestTrace gen_static_zipf(std::size_t n_contents, double s, std::size_t n_requests,
                             std::uint64_t seed, double horizon = 100.0);

enum class VariationMode { RandomFluctuation, SmoothChange };

struct SessionSchedule {
  VariationMode mode = VariationMode::RandomFluctuation;
  std::vector<std::vector<double>> sessions;  // phi^(q), one per session
  /// Upper bound on the total-variation distance between adjacent sessions.
  double adjacent_tv_bound = 1.0;

  std::size_t n_sessions() const { return sessions.size(); }
  std::size_t n_contents() const { return sessions.empty() ? 0 : sessions.front().size(); }
  std::vector<double> average() const;
  /// Every session a distribution; with `declared` given, the session mean
  /// must match it within 1e-9.
  void validate(std::span<const double> declared = {}) const;
};

/// phi^(q) = phi + lambda (d_q - mean_q d_q) with d_q ~ Dirichlet(concentration
/// * N_f * phi). lambda = magnitude, shrunk where needed to keep entries >= 0.
SessionSchedule random_fluctuation_schedule(std::span<const double> average, std::size_t n_sessions,
                                            double concentration, double magnitude,
                                            std::uint64_t seed);

/// A circular bump exp(kappa cos(2 pi j / N_f)) rotating by `laps` full turns
/// over the sessions, re-centered on the uniform distribution.
SessionSchedule smooth_change_schedule(std::size_t n_contents, std::size_t n_sessions, double kappa,
                                       double magnitude, double laps = 1.0);

/// Session q covers requests [q N_r / Q, (q + 1) N_r / Q).
RequestTrace gen_session_varying(const SessionSchedule& schedule, std::size_t n_requests,
                                 std::uint64_t seed, double horizon = 100.0);

/// Index of the first request of each session, plus N_r at the end.
std::vector<std::size_t> session_boundaries(std::size_t n_sessions, std::size_t n_requests);

struct ShotNoiseConfig {
  double zipf_s = 0.8;
  double mean_total_requests = 1e5;   // sum of per-content mean counts
  double first_request_window = 40.0;  // first-request times ~ U[0, window]
  double horizon = 100.0;
  double decay = 5.0;                  // rate A exp(-(t - t0) / decay)
  double pulse_length = 30.0;          // pulse truncated at t0 + pulse_length * decay

  void validate() const;
  /// Mean request count of content k.
  double mean_count(std::size_t n_contents, ContentId k) const;
};

/// Expected first-to-last request span averaged over contents 1..top.
double expected_top_lifetime(const ShotNoiseConfig& config, std::size_t n_contents, std::size_t top = 100);

/// Returns `config` with `decay` set so expected_top_lifetime hits `target`.
ShotNoiseConfig calibrate_decay(ShotNoiseConfig config, std::size_t n_contents, double target,
                                std::size_t top = 100);

/// Per content: t0 ~ U[0, window], events by thinning a homogeneous process.
RequestTrace gen_shot_noise(const ShotNoiseConfig& config, std::size_t n_contents, std::uint64_t seed);

/// First-to-last request span per content; nullopt for unrequested contents.
std::vector<std::optional<double>> content_lifetimes(const RequestTrace& trace);

/// Normalized counts over requests with time in [t_begin, t_end).
std::vector<double> empirical_popularity(const RequestTrace& trace, double t_begin, double t_end);
/// Normalized counts over request indices [first, last).
std::vector<double> empirical_popularity_range(const RequestTrace& trace, std::size_t first,
                                               std::size_t last);

void write_trace_csv(std::ostream& os, const RequestTrace& trace);
RequestTrace read_trace_csv(std::istream& is, std::size_t n_contents, double horizon);

}  // namespace dpc
