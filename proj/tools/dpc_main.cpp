// dpc: placement, policy, simulate and reproduce commands.
//
// Exit codes: 0 success, 1 usage or config error, 2 acceptance threshold
// violated, 3 internal invariant violated.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "dpc/errors.hpp"
#include "dpc/experiment.hpp"
#include "dpc/reproduce.hpp"

namespace {

constexpr int kOk = 0, kUsage = 1, kThreshold = 2, kInternal = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool no_refine = false;
  std::optional<std::size_t> truncate_states;
};

void add_common(CLI::App* cmd, Flags& f, bool needs_config) {
  auto* c = cmd->add_option("--config", f.config, "experiment config (JSON)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--no-refine", f.no_refine, "skip chain refinement");
  cmd->add_option("--truncate-states", f.truncate_states, "keep the K states with the largest summed popularity")
      ->check(CLI::PositiveNumber);
}

dpc::ExperimentConfig load(const Flags& f) {
  dpc::CliOverrides o;
  o.seed = f.seed;
  if (f.out) o.output = *f.out;
  o.no_refine = f.no_refine;
  o.truncate_states = f.truncate_states;
  return dpc::load_config(f.config, o);
}

int reproduce(int id, const Flags& f, bool quick) {
  dpc::ReproduceOptions opt;
  opt.out = f.out ? std::filesystem::path(*f.out) : std::filesystem::path("out");
  opt.seed = f.seed.value_or(1);
  opt.full_grid = !quick;
  const auto report = dpc::reproduce_example(id, opt);
  for (const auto& c : report.checks)
    std::printf("%s  example %d: %s = %.6g (%s %.6g)\n", c.pass ? "PASS" : "FAIL", id, c.name.c_str(), c.value,
                c.relation.c_str(), c.threshold);
  return report.pass() ? kOk : kThreshold;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic probabilistic caching: placement, replacement chains and simulation"};
  app.require_subcommand(1);

  Flags placement_flags, policy_flags, simulate_flags, reproduce_flags;
  auto* placement = app.add_subcommand("placement", "solve eta for a placement target and validate it");
  add_common(placement, placement_flags, true);
  auto* policy = app.add_subcommand("policy", "build the replacement chain, tau and its reports");
  add_common(policy, policy_flags, true);
  auto* simulate = app.add_subcommand("simulate", "simulate caching policies on generated traces");
  add_common(simulate, simulate_flags, true);
  auto* repro = app.add_subcommand("reproduce", "run a pinned example end to end and check its thresholds");
  add_common(repro, reproduce_flags, false);
  int example = 0;
  bool quick = false;
  repro->add_option("example", example, "example id")->required()->check(CLI::Range(1, 4));
  repro->add_flag("--quick", quick, "example 4: base point only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*placement) dpc::cmd_placement(load(placement_flags));
    else if (*policy) dpc::cmd_policy(load(policy_flags));
    else if (*simulate) dpc::cmd_simulate(load(simulate_flags));
    else return reproduce(example, reproduce_flags, quick);
    return kOk;
  } catch (const dpc::InvariantViolation& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  } catch (const dpc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
