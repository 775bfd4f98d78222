#pragma once

// Brute-force oracles and random instance helpers shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "dpc/policy.hpp"
#include "dpc/state_space.hpp"

namespace dpc::test {

/// All c-subsets of {1..n} in lexicographic order, by plain recursion.
inline std::vector<std::vector<ContentId>> all_subsets(std::size_t n, std::size_t c) {
  std::vector<std::vector<ContentId>> out;
  std::vector<ContentId> cur;
  auto rec = [&](auto&& self, ContentId next) -> void {
    if (cur.size() == c) {
      out.push_back(cur);
      return;
    }
    for (ContentId k = next; k <= n; ++k) {
      cur.push_back(k);
      self(self, k + 1);
      cur.pop_back();
    }
  };
  rec(rec, 1);
  return out;
}

inline std::size_t overlap(const std::vector<ContentId>& a, const std::vector<ContentId>& b) {
  std::size_t same = 0;
  for (ContentId k : a) same += std::count(b.begin(), b.end(), k);
  return same;
}

/// Uniform draw from the simplex of dimension n.
inline std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += (x = e(rng));
  for (auto& x : v) x /= s;
  return v;
}

/// Random eta over (n, c) whose support is a connected set of states: grown
/// by a random walk on the neighbor graph.
inline std::vector<double> random_connected_eta(const StateSpace& space, std::size_t support,
                                                std::mt19937_64& rng) {
  std::set<StateIndex> chosen;
  std::uniform_int_distribution<StateIndex> pick(0, space.size() - 1);
  chosen.insert(pick(rng));
  while (chosen.size() < std::min<std::size_t>(support, space.size())) {
    std::vector<StateIndex> members(chosen.begin(), chosen.end());
    const StateIndex from = members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng)];
    const auto nb = space.neighbors(from);
    if (nb.empty()) break;
    chosen.insert(nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)]);
  }
  std::vector<double> eta(space.size(), 0.0);
  const auto w = random_simplex(chosen.size(), rng);
  std::size_t i = 0;
  for (StateIndex m : chosen) eta[m] = w[i++];
  return eta;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace dpc::test
