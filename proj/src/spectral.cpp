#include "dpc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "dpc/errors.hpp"

namespace dpc {

namespace {

double second_modulus(std::vector<double> moduli) {
  std::sort(moduli.begin(), moduli.end(), std::greater<>());
  return moduli.size() < 2 ? 0.0 : moduli[1];
}

}  // namespace

std::optional<double> slem(const TransitionMatrix& theta, std::span<const double> eta) {
  const std::size_t n = theta.size();
  if (n == 0) throw InvalidArgument("empty matrix");
  if (n == 1) return 0.0;
  if (n > kDenseSpectrumLimit) return std::nullopt;
  const Eigen::MatrixXd p = theta.dense();

  if (eta.size() == n && std::all_of(eta.begin(), eta.end(), [](double v) { return v > 0.0; })) {
    // D^-1/2 Theta D^1/2 is symmetric when Theta is reversible w.r.t. eta.
    Eigen::VectorXd s(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) s(static_cast<Eigen::Index>(i)) = std::sqrt(eta[i]);
    const Eigen::MatrixXd b = s.cwiseInverse().asDiagonal() * p * s.asDiagonal();
    const double asym = (b - b.transpose()).cwiseAbs().maxCoeff();
    if (asym <= 1e-10) {
      const Eigen::MatrixXd sym = 0.5 * (b + b.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
      std::vector<double> mod(n);
      for (std::size_t i = 0; i < n; ++i) mod[i] = std::abs(es.eigenvalues()(static_cast<Eigen::Index>(i)));
      return second_modulus(std::move(mod));
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(p, false);
  std::vector<double> mod(n);
  for (std::size_t i = 0; i < n; ++i) mod[i] = std::abs(es.eigenvalues()(static_cast<Eigen::Index>(i)));
  return second_modulus(std::move(mod));
}

Evolution distribution_evolution(const TransitionMatrix& theta, std::span<const double> eta0,
                                 std::span<const double> eta_star, std::size_t t_max,
                                 double threshold, bool keep_trajectory) {
  const std::size_t n = theta.size();
  if (eta0.size() != n || eta_star.size() != n) throw InvalidArgument("distribution length mismatch");
  auto distance = [&](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (x[i] - eta_star[i]) * (x[i] - eta_star[i]);
    return std::sqrt(s);
  };
  Evolution ev;
  std::vector<double> x(eta0.begin(), eta0.end());
  for (std::size_t t = 0;; ++t) {
    const double d = distance(x);
    if (keep_trajectory) ev.trajectory.push_back(d);
    if (d < threshold) {
      ev.iterations = t;
      break;
    }
    if (t == t_max) break;
    x = theta.multiply(x);
  }
  return ev;
}

MixingReport mixing_report(const TransitionMatrix& theta, std::span<const double> eta_star,
                           std::size_t n_trials, double threshold, std::uint64_t seed,
                           std::size_t t_max) {
  MixingReport r;
  r.slem = slem(theta, eta_star);
  r.threshold = threshold;
  r.trials = n_trials;
  if (n_trials == 0) return r;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  const std::size_t n = theta.size();
  std::vector<double> eta0(n);
  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    double sum = 0.0;
    for (auto& v : eta0) sum += (v = expo(rng));
    for (auto& v : eta0) v /= sum;
    const auto ev = distribution_evolution(theta, eta0, eta_star, t_max, threshold, false);
    if (ev.iterations) ++r.converged;
    r.iterations.push_back(ev.iterations.value_or(t_max));
  }
  auto sorted = r.iterations;
  std::sort(sorted.begin(), sorted.end());
  r.min = sorted.front();
  r.max = sorted.back();
  const std::size_t mid = sorted.size() / 2;
  r.median = sorted.size() % 2 ? static_cast<double>(sorted[mid])
                               : 0.5 * static_cast<double>(sorted[mid - 1] + sorted[mid]);
  double total = 0.0;
  for (auto v : sorted) total += static_cast<double>(v);
  r.mean = total / static_cast<double>(sorted.size());
  return r;
}

}  // namespace dpc
