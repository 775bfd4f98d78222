#include "dpc/reproduce.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dpc/errors.hpp"

namespace dpc {

Check make_check(std::string name, double value, std::string relation, double threshold) {
  bool pass = false;
  if (relation == "<") pass = value < threshold;
  else if (relation == "<=") pass = value <= threshold;
  else if (relation == ">") pass = value > threshold;
  else if (relation == ">=") pass = value >= threshold;
  else throw InvalidArgument("unknown relation " + relation);
  return {std::move(name), value, std::move(relation), threshold, pass};
}

bool ExampleReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

Json ExampleReport::to_json() const {
  Json list = Json::array();
  for (const auto& c : checks)
    list.push_back({{"name", c.name}, {"value", c.value}, {"relation", c.relation},
                    {"threshold", c.threshold}, {"pass", c.pass}});
  return Json{{"example", example}, {"pass", pass()}, {"checks", list}, {"details", details}};
}

namespace {

ExperimentConfig pinned(const Json& j, const ReproduceOptions& options) {
  CliOverrides o;
  o.seed = options.seed;
  auto c = parse_config(j, o);
  c.simulation.threads = options.threads;
  return c;
}

OutputHeader header_of(int id, const ExperimentConfig& c) {
  return {"reproduce example " + std::to_string(id), config_hash(to_json(c)), c.seed};
}

std::optional<std::filesystem::path> dir_of(int id, const ReproduceOptions& options) {
  if (!options.out) return std::nullopt;
  return *options.out / ("example" + std::to_string(id));
}

void finish(const ExampleReport& report, const std::optional<std::filesystem::path>& dir, const OutputHeader& header) {
  if (!dir) return;
  auto j = report.to_json();
  j["header"] = to_json(header);
  write_file(*dir / "summary.json", json_text(j));
}

const ComparisonRow& row_named(const std::vector<ComparisonRow>& rows, const std::string& name) {
  for (const auto& r : rows)
    if (r.policy == name) return r;
  throw InvariantViolation("missing policy row " + name);
}

}  // namespace

Json example_config(int id) {
  switch (id) {
    case 1:
      return Json::parse(R"({
        "catalog": {"n_contents": 5, "zipf_s": 0.8},
        "cache_size": 2,
        "placement": {"method": "state_popularity"},
        "policy": {"mixing_trials": 10000, "mixing_threshold": 0.001}
      })");
    case 2:
      return Json::parse(R"({
        "catalog": {"n_contents": 15, "zipf_s": 0.8},
        "cache_size": 8,
        "placement": {"method": "block_filling"},
        "workload": {"kind": "static_zipf", "n_requests": 1000000},
        "simulation": {"policies": ["proposed", "lru", "lfu"], "runs": 1, "start": "sample",
                       "occupancy_window": 200000, "checkpoint_every": 10000}
      })");
    case 3:
      return Json::parse(R"({
        "catalog": {"n_contents": 23, "zipf_s": 0.0},
        "cache_size": 2,
        "placement": {"method": "solver"},
        "workload": {"kind": "session", "n_requests": 2000000,
                     "session": {"n_sessions": 50, "concentration": 3.5, "magnitude": 1.0,
                                 "kappa": 0.75, "laps": 1.0}},
        "simulation": {"policies": ["static", "proposed"], "runs": 1, "start": "sample"}
      })");
    case 4:
      return Json::parse(R"({
        "catalog": {"n_contents": 10000, "zipf_s": 0.8},
        "cache_size": 30,
        "policy": {"truncate_states": 30},
        "workload": {"kind": "shot_noise", "shot_noise": {"target_lifetime": 32.7}},
        "simulation": {"policies": ["static", "proposed", "lru"], "runs": 40,
                       "phi_source": "empirical", "start": "top"}
      })");
    default:
      throw InvalidArgument("example id must be 1, 2, 3 or 4");
  }
}

// ---------------------------------------------------------------------------

ExampleReport reproduce_example1(const ReproduceOptions& options) {
  const auto config = pinned(example_config(1), options);
  const auto header = header_of(1, config);
  const auto dir = dir_of(1, options);
  const auto catalog = config.catalog.build();
  const auto prep = prepare_chain(config, catalog);
  const auto& in = prep.input;
  const auto& p = config.policy;

  const auto basic = mixing_report(prep.chain.basic, in.eta, p.mixing_trials, p.mixing_threshold, config.seed, p.mixing_t_max);
  const auto refined = mixing_report(prep.chain.theta, in.eta, p.mixing_trials, p.mixing_threshold, config.seed, p.mixing_t_max);
  const auto vb = verify_theorem1(prep.chain.basic, in);
  const auto vr = verify_theorem1(prep.chain.theta, in);

  ExampleReport report;
  report.example = 1;
  const double trials = static_cast<double>(p.mixing_trials);
  report.checks.push_back(make_check("basic chain: starts reaching the threshold", static_cast<double>(basic.converged), ">=", trials));
  report.checks.push_back(make_check("refined chain: starts reaching the threshold", static_cast<double>(refined.converged), ">=", trials));
  report.checks.push_back(make_check("median iterations basic / refined", basic.median / refined.median, ">=", 2.0));
  report.checks.push_back(make_check("basic chain verified", vb.all() ? 1.0 : 0.0, ">=", 1.0));
  report.checks.push_back(make_check("refined chain verified", vr.all() ? 1.0 : 0.0, ">=", 1.0));
  report.details = {{"n_states", in.size()},
                    {"basic", to_json(basic)},
                    {"refined", to_json(refined)},
                    {"reference_speedup", 10.0}};

  if (dir) {
    write_file(*dir / "states.csv", eta_csv(header, in.states, in.eta));
    write_file(*dir / "theta_basic.csv", theta_csv(header, prep.chain.basic));
    write_file(*dir / "theta.csv", theta_csv(header, prep.chain.theta));
    CsvWriter iters(header, {"trial", "basic", "refined"});
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> hist;
    for (std::size_t t = 0; t < basic.iterations.size(); ++t) {
      iters.cell(std::uint64_t{t}).cell(std::uint64_t{basic.iterations[t]}).cell(std::uint64_t{refined.iterations[t]});
      iters.end_row();
      ++hist[basic.iterations[t]].first;
      ++hist[refined.iterations[t]].second;
    }
    write_file(*dir / "iterations.csv", iters.str());
    CsvWriter h(header, {"iterations", "basic", "refined"});
    for (const auto& [it, counts] : hist) {
      h.cell(std::uint64_t{it}).cell(std::uint64_t{counts.first}).cell(std::uint64_t{counts.second});
      h.end_row();
    }
    write_file(*dir / "histogram.csv", h.str());
  }
  finish(report, dir, header);
  return report;
}

ExampleReport reproduce_example2(const ReproduceOptions& options) {
  const auto config = pinned(example_config(2), options);
  const auto header = header_of(2, config);
  const auto dir = dir_of(2, options);
  const auto rows = run_simulation(config);
  const std::size_t burn_in = config.simulation.occupancy_window;

  const auto& proposed = row_named(rows, "proposed").results.front();
  if (proposed.checkpoints.empty()) throw InvariantViolation("no checkpoints recorded");
  const double terminal = proposed.checkpoints.back().squared_distance;
  auto min_after = [&](const SimulationResult& r) {
    double m = INFINITY;
    for (const auto& cp : r.checkpoints)
      if (cp.request >= burn_in) m = std::min(m, cp.squared_distance);
    return m;
  };
  auto max_after = [&](const SimulationResult& r) {
    double m = 0.0;
    for (const auto& cp : r.checkpoints)
      if (cp.request >= burn_in) m = std::max(m, cp.squared_distance);
    return m;
  };

  ExampleReport report;
  report.example = 2;
  report.checks.push_back(make_check("proposed: terminal ||eta_hat - eta*||^2", terminal, "<", 0.05));
  for (const char* name : {"lru", "lfu"}) {
    const auto& r = row_named(rows, name).results.front();
    report.checks.push_back(make_check(std::string(name) + ": smallest distance after burn-in", min_after(r), ">", terminal));
  }
  report.details = {{"burn_in", burn_in},
                    {"proposed_max_after_burn_in", max_after(proposed)},
                    {"hit_ratio", {{"proposed", row_named(rows, "proposed").hit_ratio.mean},
                                   {"lru", row_named(rows, "lru").hit_ratio.mean},
                                   {"lfu", row_named(rows, "lfu").hit_ratio.mean}}}};
  if (dir) {
    const auto tables = comparison_tables(header, rows);
    write_file(*dir / "checkpoints.csv", tables.checkpoints);
    write_file(*dir / "summary.csv", tables.summary);
    const auto prep = prepare_chain(config, config.catalog.build());
    write_file(*dir / "states.csv", eta_csv(header, prep.input.states, prep.input.eta));
  }
  finish(report, dir, header);
  return report;
}

ExampleReport reproduce_example3(const ReproduceOptions& options) {
  ExampleReport report;
  report.example = 3;
  const auto base = pinned(example_config(3), options);
  const auto header = header_of(3, base);
  const auto dir = dir_of(3, options);
  const double analytic = 2.0 / 23.0;
  const std::map<std::string, double> reference{{"random_fluctuation", 0.1063}, {"smooth_change", 0.1085}};

  for (auto mode : {VariationMode::RandomFluctuation, VariationMode::SmoothChange}) {
    auto config = base;
    config.workload.mode = mode;
    const std::string name = mode == VariationMode::RandomFluctuation ? "random_fluctuation" : "smooth_change";
    const auto mode_header = header_of(3, config);
    const auto rows = run_simulation(config);
    const double st = row_named(rows, "static").hit_ratio.mean;
    const double dyn = row_named(rows, "proposed").hit_ratio.mean;
    report.checks.push_back(make_check(name + ": static hit ratio", st, ">=", 0.087 - 0.005));
    report.checks.push_back(make_check(name + ": static hit ratio", st, "<=", 0.087 + 0.005));
    report.checks.push_back(make_check(name + ": relative gain of proposed over static", dyn / st - 1.0, ">=", 0.10));
    report.details[name] = {{"static", st}, {"proposed", dyn}, {"analytic_static", analytic},
                            {"reference_proposed", reference.at(name)}};
    if (dir) {
      const auto tables = comparison_tables(mode_header, rows);
      write_file(*dir / name / "series.csv", tables.series);
      write_file(*dir / name / "summary.csv", tables.summary);
      const auto catalog = config.catalog.build();
      const auto schedule = make_schedule(config, catalog, run_trace_seed(config.seed, 0));
      CsvWriter w(mode_header, {"session", "content", "phi"});
      for (std::size_t q = 0; q < schedule.n_sessions(); ++q)
        for (std::size_t k = 0; k < schedule.n_contents(); ++k) {
          w.cell(std::uint64_t{q}).cell(std::uint64_t{k + 1}).cell(schedule.sessions[q][k]);
          w.end_row();
        }
      write_file(*dir / name / "schedule.csv", w.str());
    }
  }
  finish(report, dir, header);
  return report;
}

ExampleReport reproduce_example4(const ReproduceOptions& options) {
  ExampleReport report;
  report.example = 4;
  const Json base_json = example_config(4);
  const auto base = pinned(base_json, options);
  const auto header = header_of(4, base);
  const auto dir = dir_of(4, options);

  struct Point {
    std::string sweep;
    double s;
    std::size_t c;
    double lifetime;
  };
  std::vector<Point> points{{"base", 0.8, 30, 32.7}};
  if (options.full_grid) {
    for (double s : {0.6, 0.7, 0.9, 1.0, 1.1}) points.push_back({"zipf_s", s, 30, 32.7});
    for (std::size_t c : {10, 20, 40, 50}) points.push_back({"cache_size", 0.8, c, 32.7});
    for (double l : {10.0, 20.0, 50.0}) points.push_back({"lifetime", 0.8, 30, l});
  }

  CsvWriter trends(header, {"sweep", "zipf_s", "cache_size", "lifetime", "policy", "runs", "hit_ratio_mean",
                            "hit_ratio_ci95", "replacements_mean", "replacements_ci95"});
  Json points_json = Json::array();
  for (const auto& pt : points) {
    Json j = base_json;
    j["catalog"]["zipf_s"] = pt.s;
    j["cache_size"] = pt.c;
    j["workload"]["shot_noise"]["target_lifetime"] = pt.lifetime;
    const auto config = pinned(j, options);
    const auto rows = run_simulation(config);
    Json pj{{"sweep", pt.sweep}, {"zipf_s", pt.s}, {"cache_size", pt.c}, {"lifetime", pt.lifetime}};
    for (const auto& row : rows) {
      trends.cell(pt.sweep).cell(pt.s).cell(std::uint64_t{pt.c}).cell(pt.lifetime).cell(row.policy);
      trends.cell(std::uint64_t{row.runs}).cell(row.hit_ratio.mean).cell(row.hit_ratio.ci95);
      trends.cell(row.replacements.mean).cell(row.replacements.ci95);
      trends.end_row();
      pj[row.policy] = {{"hit_ratio", row.hit_ratio.mean}, {"replacements", row.replacements.mean}};
    }
    const double lru_rep = row_named(rows, "lru").replacements.mean;
    pj["replacement_ratio"] = lru_rep > 0 ? row_named(rows, "proposed").replacements.mean / lru_rep : 0.0;
    if (pt.sweep == "base") {
      report.checks.push_back(make_check("proposed hit ratio minus optimal static",
                                         row_named(rows, "proposed").hit_ratio.mean - row_named(rows, "static").hit_ratio.mean,
                                         ">=", 0.0));
      report.checks.push_back(make_check("proposed replacements / LRU replacements", pj["replacement_ratio"].get<double>(), "<=", 0.2));
    }
    points_json.push_back(pj);
  }
  report.details = {{"points", points_json}, {"runs_per_point", base.simulation.runs}};
  if (dir) write_file(*dir / "trends.csv", trends.str());
  finish(report, dir, header);
  return report;
}

ExampleReport reproduce_example(int id, const ReproduceOptions& options) {
  switch (id) {
    case 1: return reproduce_example1(options);
    case 2: return reproduce_example2(options);
    case 3: return reproduce_example3(options);
    case 4: return reproduce_example4(options);
    default: throw InvalidArgument("example id must be 1, 2, 3 or 4");
  }
}

}  // namespace dpc
