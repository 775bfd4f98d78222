#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "dpc/errors.hpp"
#include "dpc/experiment.hpp"
#include "dpc/io.hpp"
#include "dpc/reproduce.hpp"

using namespace dpc;
namespace fs = std::filesystem;

namespace {

Json small_config() {
  return Json::parse(R"({
    "seed": 3,
    "catalog": {"n_contents": 6, "zipf_s": 0.8},
    "cache_size": 2,
    "placement": {"method": "solver"},
    "workload": {"kind": "static_zipf", "n_requests": 2000},
    "simulation": {"policies": ["proposed", "static", "lru", "lfu"], "runs": 2}
  })");
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("dpc_exp_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int exit_code(const std::string& args) {
  const std::string cmd = std::string("\"") + DPC_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(small_config());
  CHECK(c.seed == 3);
  CHECK(c.cache_size == 2);
  CHECK(c.simulation.runs == 2);
  CHECK(c.policy.refine);

  SUBCASE("seed is required") {
    auto j = small_config();
    j.erase("seed");
    CHECK_THROWS_AS(parse_config(j), InvalidArgument);
    CliOverrides o;
    o.seed = 9;
    CHECK(parse_config(j, o).seed == 9);
  }
  SUBCASE("unknown keys are rejected") {
    auto j = small_config();
    j["workload"]["n_request"] = 5;
    CHECK_THROWS_AS(parse_config(j), InvalidArgument);
  }
  SUBCASE("type and range errors") {
    auto j = small_config();
    j["simulation"]["runs"] = -1;
    CHECK_THROWS_AS(parse_config(j), InvalidArgument);
    j = small_config();
    j["simulation"]["runs"] = 1.5;
    CHECK_THROWS_AS(parse_config(j), InvalidArgument);
    j = small_config();
    j["placement"]["method"] = "greedy";
    CHECK_THROWS_AS(parse_config(j), InvalidArgument);
  }
  SUBCASE("overrides") {
    CliOverrides o;
    o.no_refine = true;
    o.truncate_states = 4;
    o.output = "elsewhere";
    const auto d = parse_config(small_config(), o);
    CHECK_FALSE(d.policy.refine);
    CHECK(d.policy.truncate_states == 4u);
    CHECK(d.output == fs::path("elsewhere"));
    // The output directory does not enter the hash.
    CliOverrides other;
    other.output = "another";
    CHECK(config_hash(to_json(d)) != config_hash(to_json(c)));
    CHECK(config_hash(to_json(parse_config(small_config(), other))) == config_hash(to_json(c)));
  }
}

TEST_CASE("normalized config parses back to itself") {
  for (int id = 1; id <= 4; ++id) {
    auto j = example_config(id);
    j["seed"] = 11;
    const Json once = to_json(parse_config(j));
    CHECK(to_json(parse_config(once)) == once);
  }
}

TEST_CASE("number and state formatting") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.5) == "0.5");
  const CacheState s{{1, 4, 7}};
  CHECK(format_state(s) == "1 4 7");
  CHECK(parse_state("1 4 7") == s);
}

TEST_CASE("csv writer") {
  CsvWriter w({"simulate", 0xabcULL, 42}, {"a", "b"});
  w.cell("x").cell(0.25);
  w.end_row();
  const auto text = w.str();
  CHECK(text.find("# dpc simulate\n") == 0);
  CHECK(text.find("# config_hash 0000000000000abc\n") != std::string::npos);
  CHECK(text.find("# seed 42\n") != std::string::npos);
  CHECK(text.find("a,b\nx,0.25\n") != std::string::npos);
  w.cell("only one");
  CHECK_THROWS_AS(w.end_row(), InvariantViolation);
}

TEST_CASE("eta tables round trip") {
  const auto space = StateSpace::enumerate(5, 2);
  const auto states = StateSet::all_of(space);
  const std::vector<double> eta{0.6, 0.2, 0.1, 0, 0.1, 0, 0, 0, 0, 0};
  const auto text = eta_csv({"placement", 1, 1}, states, eta);
  const auto [read_states, read_eta] = read_eta_csv(text);
  REQUIRE(read_states.size() == 4);
  CHECK(read_states[0] == CacheState{{1, 2}});
  CHECK(read_states[3] == CacheState{{2, 3}});
  CHECK(read_eta == std::vector<double>{0.6, 0.2, 0.1, 0.1});
}

TEST_CASE("a 0/1 target leaves a single state") {
  auto j = small_config();
  j["catalog"] = {{"n_contents", 4}, {"popularity", {0.4, 0.4, 0.1, 0.1}}};
  j["placement"] = {{"method", "solver"}, {"target", {1.0, 1.0, 0.0, 0.0}}};
  for (const char* method : {"solver", "block_filling"}) {
    j["placement"]["method"] = method;
    const auto c = parse_config(j);
    const auto prepared = prepare_chain(c, c.catalog.build());
    REQUIRE(prepared.input.size() == 1);
    CHECK(prepared.input.states.state(0) == CacheState{{1, 2}});
    CHECK(prepared.chain.theta.get(0, 0) == 1.0);
  }
}

TEST_CASE("commands write their artifacts, and eta files feed the chain") {
  TempDir tmp;
  auto c = parse_config(small_config());
  c.output = tmp.path / "placement";
  cmd_placement(c);
  for (const char* f : {"eta_solver.csv", "eta_block_filling.csv", "placement.json"})
    CHECK(fs::exists(c.output / f));

  c.output = tmp.path / "policy";
  cmd_policy(c);
  for (const char* f : {"states.csv", "theta_basic.csv", "theta.csv", "tau.csv", "policy.json"})
    CHECK(fs::exists(c.output / f));

  c.output = tmp.path / "simulate";
  cmd_simulate(c);
  for (const char* f : {"summary.csv", "runs.csv", "series.csv", "summary.json"}) CHECK(fs::exists(c.output / f));

  auto j = small_config();
  j["placement"]["eta_file"] = (tmp.path / "placement" / "eta_solver.csv").string();
  const auto from_file = parse_config(j);
  const auto direct = prepare_chain(parse_config(small_config()), from_file.catalog.build());
  const auto loaded = prepare_chain(from_file, from_file.catalog.build());
  REQUIRE(loaded.input.size() == direct.input.size());
  for (std::size_t i = 0; i < loaded.input.size(); ++i) {
    CHECK(loaded.input.states.state(i) == direct.input.states.state(i));
    CHECK(loaded.input.eta[i] == direct.input.eta[i]);
  }
}

TEST_CASE("command-line exit codes") {
  TempDir tmp;
  CHECK(exit_code("--help") == 0);
  CHECK(exit_code("") != 0);
  CHECK(exit_code("placement --config " + (tmp.path / "missing.json").string()) == 1);
  CHECK(exit_code("reproduce 5") == 1);

  auto j = small_config();
  write_file(tmp.path / "ok.json", json_text(j));
  CHECK(exit_code("placement --config " + (tmp.path / "ok.json").string() + " --out " +
                  (tmp.path / "out").string()) == 0);

  j["catalog"]["color"] = "red";
  write_file(tmp.path / "unknown.json", json_text(j));
  CHECK(exit_code("placement --config " + (tmp.path / "unknown.json").string()) == 1);

  j = small_config();
  j["placement"]["target"] = {0.9, 0.9, 0.5, 0.5, 0.0, 0.0};  // sums to 2.8
  write_file(tmp.path / "infeasible.json", json_text(j));
  CHECK(exit_code("placement --config " + (tmp.path / "infeasible.json").string()) == 1);

  write_file(tmp.path / "broken.json", "{ not json");
  CHECK(exit_code("placement --config " + (tmp.path / "broken.json").string()) == 1);
}
