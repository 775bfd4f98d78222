#pragma once

// Config-driven commands behind the command-line tool.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpc/io.hpp"
#include "dpc/placement.hpp"
#include "dpc/policy.hpp"
#include "dpc/simulator.hpp"
#include "dpc/workload.hpp"

namespace dpc {

struct CatalogSpec {
  std::size_t n_contents = 0;
  std::optional<double> zipf_s;   // either this
  std::vector<double> popularity;  // or an explicit phi

  ContentCatalog build() const;
};

struct PlacementSpec {
  enum class Method { Solver, BlockFilling, StatePopularity };
  Method method = Method::Solver;
  std::vector<double> target;        // empty: capped proportional to phi
  std::vector<ContentId> ordering;   // block filling only; empty: default
  std::optional<std::filesystem::path> eta_file;  // precomputed eta (placement output)
};

struct PolicySpec {
  double omega_scale = 1.0;
  bool refine = true;
  std::optional<std::size_t> truncate_states;  // keep the K states with largest sum of phi
  std::size_t mixing_trials = 1000;
  double mixing_threshold = 1e-3;
  std::size_t mixing_t_max = 1'000'000;
};

struct WorkloadSpec {
  enum class Kind { StaticZipf, Session, ShotNoise, TraceFile };
  Kind kind = Kind::StaticZipf;
  std::size_t n_requests = 0;
  double horizon = 100.0;
  std::optional<double> zipf_s;  // static Zipf; absent: draw from the catalog phi
  // sessions
  VariationMode mode = VariationMode::RandomFluctuation;
  std::size_t n_sessions = 50;
  double concentration = 1.0;
  double magnitude = 1.0;
  double kappa = 1.0;
  double laps = 1.0;
  // shot noise
  ShotNoiseConfig shot_noise;
  std::optional<double> target_lifetime;  // calibrates shot_noise.decay
  // trace file
  std::filesystem::path trace_file;
};

struct SimulationSpec {
  enum class PhiSource { Catalog, Empirical };
  enum class StartState { Sample, Top };
  std::vector<std::string> policies{"proposed", "static", "lru", "lfu"};
  std::size_t runs = 1;
  std::size_t threads = 0;
  PhiSource phi_source = PhiSource::Catalog;
  /// Static and baseline start state: drawn from eta*, or the c most popular.
  StartState start = StartState::Sample;
  std::size_t series_window = 0;  // 0: per session for session traces, else whole trace
  std::size_t occupancy_window = 0;
  std::size_t checkpoint_every = 0;
};

struct ExperimentConfig {
  CatalogSpec catalog;
  std::size_t cache_size = 0;
  PlacementSpec placement;
  PolicySpec policy;
  WorkloadSpec workload;
  SimulationSpec simulation;
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";
  std::uint64_t state_cap = kDefaultStateCap;
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
  bool no_refine = false;
  std::optional<std::size_t> truncate_states;
};

/// Strict: unknown keys and type mismatches throw InvalidArgument. A seed is
/// required, from the config or the overrides. Relative file paths resolve
/// against `base_dir`.
ExperimentConfig parse_config(const Json& j, const CliOverrides& overrides = {},
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path, const CliOverrides& overrides = {});

/// Normalized form with every default filled in; its hash tags the outputs.
Json to_json(const ExperimentConfig& config);

/// The chain a config describes: eta from a file, from top-K truncation
/// (eta proportional to the summed popularity), or from the placement method.
struct PreparedChain {
  ChainInput input;
  CompiledChain chain;
  std::optional<StateSpace> space;  // when the full space was enumerated
  std::optional<StateDistribution> full_eta;  // eta over *space
};

PreparedChain prepare_chain(const ExperimentConfig& config, const ContentCatalog& catalog);

/// The c contents with the largest phi, ties by id.
CacheState most_popular_state(std::span<const double> phi, std::size_t cache_size);

/// The session schedule of a session workload generated with `seed`.
SessionSchedule make_schedule(const ExperimentConfig& config, const ContentCatalog& catalog, std::uint64_t seed);
RequestTrace make_workload(const ExperimentConfig& config, const ContentCatalog& catalog, std::uint64_t seed);

/// compare() over the configured policies and workload.
std::vector<ComparisonRow> run_simulation(const ExperimentConfig& config);

/// Each command writes into config.output and throws on failure.
void cmd_placement(const ExperimentConfig& config);
void cmd_policy(const ExperimentConfig& config);
void cmd_simulate(const ExperimentConfig& config);

/// CSV tables of a comparison: summary, per run, series, checkpoints.
struct ComparisonTables {
  std::string summary;
  std::string runs;
  std::string series;
  std::string checkpoints;
};
ComparisonTables comparison_tables(const OutputHeader& header, const std::vector<ComparisonRow>& rows);

}  // namespace dpc
