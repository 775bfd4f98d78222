#pragma once

// Pinned end-to-end runs of the four numerical examples, each checked
// against fixed acceptance thresholds.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpc/experiment.hpp"

namespace dpc {

struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;  // "<", "<=", ">", ">="
  double threshold = 0.0;
  bool pass = false;
};

Check make_check(std::string name, double value, std::string relation, double threshold);

struct ExampleReport {
  int example = 0;
  std::vector<Check> checks;
  Json details;

  bool pass() const;
  Json to_json() const;
};

struct ReproduceOptions {
  /// Artifacts go to out/example<N>/ when set.
  std::optional<std::filesystem::path> out;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  /// Example 4: sweep s, cache size and lifetime, not just the base point.
  bool full_grid = true;
};

/// Convergence of the basic and refined chains from 10000 random starts.
ExampleReport reproduce_example1(const ReproduceOptions& options);
/// Occupancy of proposed, LRU and LFU against eta* on (15, 8).
ExampleReport reproduce_example2(const ReproduceOptions& options);
/// Hit ratio under session-varying popularity, both variation modes.
ExampleReport reproduce_example3(const ReproduceOptions& options);
/// Shot-noise traces on 10000 contents with 30 truncated states.
ExampleReport reproduce_example4(const ReproduceOptions& options);

ExampleReport reproduce_example(int id, const ReproduceOptions& options);

/// The pinned configs (as accepted by parse_config).
Json example_config(int id);

}  // namespace dpc
