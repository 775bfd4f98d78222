#include "dpc/experiment.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "dpc/errors.hpp"

namespace dpc {

namespace {

// Strict object reader: every key must be consumed by finish().
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidArgument(where_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw InvalidArgument(path(key) + " must be a number");
    return v.get<double>();
  }
  std::optional<double> maybe_number(const std::string& key) {
    if (!has(key)) {
      used_.insert(key);
      return std::nullopt;
    }
    return number(key, 0.0);
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    // Parsed text gives unsigned values; integers set from code may be signed.
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw InvalidArgument(path(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::optional<std::uint64_t> maybe_count(const std::string& key) {
    if (!has(key)) {
      used_.insert(key);
      return std::nullopt;
    }
    return count(key, 0);
  }
  bool flag(const std::string& key, bool fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw InvalidArgument(path(key) + " must be true or false");
    return j_.at(key).get<bool>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) throw InvalidArgument(path(key) + " must be a string");
    return j_.at(key).get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) {
    used_.insert(key);
    std::vector<double> out;
    if (!has(key)) return out;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw InvalidArgument(path(key) + " must be an array of numbers");
    for (const auto& x : v) {
      if (!x.is_number()) throw InvalidArgument(path(key) + " must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  Reader child(const std::string& key) {
    used_.insert(key);
    static const Json empty = Json::object();
    return Reader(has(key) ? j_.at(key) : empty, path(key));
  }
  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw InvalidArgument("unknown key " + path(it.key()));
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

template <class E>
E pick(const std::string& value, const std::map<std::string, E>& names, const std::string& where) {
  const auto it = names.find(value);
  if (it != names.end()) return it->second;
  std::string options;
  for (const auto& [name, _] : names) options += (options.empty() ? "" : ", ") + name;
  throw InvalidArgument(where + " must be one of: " + options);
}

template <class E>
std::string name_of(E value, const std::map<std::string, E>& names) {
  for (const auto& [name, v] : names)
    if (v == value) return name;
  return "";
}

const std::map<std::string, PlacementSpec::Method> kMethods{
    {"solver", PlacementSpec::Method::Solver},
    {"block_filling", PlacementSpec::Method::BlockFilling},
    {"state_popularity", PlacementSpec::Method::StatePopularity}};
const std::map<std::string, WorkloadSpec::Kind> kKinds{{"static_zipf", WorkloadSpec::Kind::StaticZipf},
                                                       {"session", WorkloadSpec::Kind::Session},
                                                       {"shot_noise", WorkloadSpec::Kind::ShotNoise},
                                                       {"trace_file", WorkloadSpec::Kind::TraceFile}};
const std::map<std::string, VariationMode> kModes{{"random_fluctuation", VariationMode::RandomFluctuation},
                                                  {"smooth_change", VariationMode::SmoothChange}};
const std::map<std::string, SimulationSpec::PhiSource> kPhiSources{
    {"catalog", SimulationSpec::PhiSource::Catalog}, {"empirical", SimulationSpec::PhiSource::Empirical}};
const std::map<std::string, SimulationSpec::StartState> kStarts{{"sample", SimulationSpec::StartState::Sample},
                                                                {"top", SimulationSpec::StartState::Top}};
const std::set<std::string> kPolicies{"proposed", "static", "lru", "lfu"};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ContentCatalog CatalogSpec::build() const {
  if (!popularity.empty()) return ContentCatalog(popularity);
  return ContentCatalog::zipf(n_contents, zipf_s.value_or(0.0));
}

ExperimentConfig parse_config(const Json& j, const CliOverrides& overrides, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  Reader root(j, "config");

  {
    auto r = root.child("catalog");
    c.catalog.popularity = r.numbers("popularity");
    c.catalog.zipf_s = r.maybe_number("zipf_s");
    c.catalog.n_contents = r.count("n_contents", c.catalog.popularity.size());
    r.finish();
    if (c.catalog.popularity.empty() == !c.catalog.zipf_s.has_value())
      throw InvalidArgument("config.catalog needs exactly one of zipf_s and popularity");
    if (!c.catalog.popularity.empty() && c.catalog.n_contents != c.catalog.popularity.size())
      throw InvalidArgument("config.catalog.n_contents differs from the popularity length");
    if (c.catalog.n_contents == 0) throw InvalidArgument("config.catalog.n_contents must be positive");
    if (c.catalog.zipf_s && *c.catalog.zipf_s < 0.0) throw InvalidArgument("config.catalog.zipf_s must be non-negative");
  }
  c.cache_size = root.count("cache_size", 0);
  if (c.cache_size == 0 || c.cache_size > c.catalog.n_contents)
    throw InvalidArgument("config.cache_size must be in [1, n_contents]");

  {
    auto r = root.child("placement");
    c.placement.method = pick(r.text("method", "solver"), kMethods, r.path("method"));
    if (r.has("target") && r.raw("target").is_string()) {
      if (r.raw("target").get<std::string>() != "capped_proportional")
        throw InvalidArgument("config.placement.target must be \"capped_proportional\" or an array");
    } else {
      c.placement.target = r.numbers("target");
    }
    for (double v : r.numbers("ordering")) {
      if (v < 1 || v != std::floor(v)) throw InvalidArgument("config.placement.ordering holds content ids");
      c.placement.ordering.push_back(static_cast<ContentId>(v));
    }
    if (r.has("eta_file")) c.placement.eta_file = resolve(base_dir, r.text("eta_file", ""));
    else r.text("eta_file", "");
    r.finish();
  }
  {
    auto r = root.child("policy");
    c.policy.omega_scale = r.number("omega_scale", 1.0);
    c.policy.refine = r.flag("refine", true);
    c.policy.truncate_states = r.maybe_count("truncate_states");
    c.policy.mixing_trials = r.count("mixing_trials", 1000);
    c.policy.mixing_threshold = r.number("mixing_threshold", 1e-3);
    c.policy.mixing_t_max = r.count("mixing_t_max", 1'000'000);
    r.finish();
    if (!(c.policy.omega_scale > 0.0 && c.policy.omega_scale <= 1.0))
      throw InvalidArgument("config.policy.omega_scale must be in (0, 1]");
  }
  {
    auto r = root.child("workload");
    auto& w = c.workload;
    w.kind = pick(r.text("kind", "static_zipf"), kKinds, r.path("kind"));
    w.n_requests = r.count("n_requests", 0);
    w.horizon = r.number("horizon", 100.0);
    w.zipf_s = r.maybe_number("zipf_s");
    {
      auto s = r.child("session");
      w.mode = pick(s.text("mode", "random_fluctuation"), kModes, s.path("mode"));
      w.n_sessions = s.count("n_sessions", 50);
      w.concentration = s.number("concentration", 1.0);
      w.magnitude = s.number("magnitude", 1.0);
      w.kappa = s.number("kappa", 1.0);
      w.laps = s.number("laps", 1.0);
      s.finish();
    }
    {
      auto s = r.child("shot_noise");
      ShotNoiseConfig d;
      w.shot_noise.zipf_s = s.number("zipf_s", w.zipf_s.value_or(c.catalog.zipf_s.value_or(d.zipf_s)));
      w.shot_noise.mean_total_requests = s.number("mean_total_requests", d.mean_total_requests);
      w.shot_noise.first_request_window = s.number("first_request_window", d.first_request_window);
      w.shot_noise.decay = s.number("decay", d.decay);
      w.shot_noise.pulse_length = s.number("pulse_length", d.pulse_length);
      w.shot_noise.horizon = w.horizon;
      w.target_lifetime = s.maybe_number("target_lifetime");
      s.finish();
      if (w.kind == WorkloadSpec::Kind::ShotNoise) w.shot_noise.validate();
    }
    if (r.has("trace_file")) w.trace_file = resolve(base_dir, r.text("trace_file", ""));
    else r.text("trace_file", "");
    r.finish();
    if (w.kind == WorkloadSpec::Kind::TraceFile && w.trace_file.empty())
      throw InvalidArgument("config.workload.trace_file is required for kind trace_file");
    if (w.kind == WorkloadSpec::Kind::Session && w.n_sessions == 0)
      throw InvalidArgument("config.workload.session.n_sessions must be positive");
  }
  {
    auto r = root.child("simulation");
    auto& s = c.simulation;
    if (r.has("policies")) {
      const auto& v = r.raw("policies");
      if (!v.is_array()) throw InvalidArgument("config.simulation.policies must be an array");
      s.policies.clear();
      for (const auto& p : v) {
        if (!p.is_string() || !kPolicies.count(p.get<std::string>()))
          throw InvalidArgument("config.simulation.policies entries are proposed, static, lru or lfu");
        s.policies.push_back(p.get<std::string>());
      }
    } else {
      r.numbers("policies");
    }
    s.runs = r.count("runs", 1);
    s.threads = r.count("threads", 0);
    s.phi_source = pick(r.text("phi_source", "catalog"), kPhiSources, r.path("phi_source"));
    s.start = pick(r.text("start", "sample"), kStarts, r.path("start"));
    s.series_window = r.count("series_window", 0);
    s.occupancy_window = r.count("occupancy_window", 0);
    s.checkpoint_every = r.count("checkpoint_every", 0);
    r.finish();
    if (s.runs == 0) throw InvalidArgument("config.simulation.runs must be positive");
    if (s.occupancy_window && s.phi_source == SimulationSpec::PhiSource::Empirical)
      throw InvalidArgument("occupancy tracking needs a fixed eta; use phi_source catalog");
  }

  const auto seed = root.maybe_count("seed");
  c.output = root.text("output", "out");
  c.state_cap = root.count("state_cap", kDefaultStateCap);
  root.finish();

  if (overrides.seed) c.seed = *overrides.seed;
  else if (seed) c.seed = *seed;
  else throw InvalidArgument("a seed is required: set config.seed or pass --seed");
  if (overrides.output) c.output = *overrides.output;
  if (overrides.no_refine) c.policy.refine = false;
  if (overrides.truncate_states) c.policy.truncate_states = *overrides.truncate_states;
  if (c.policy.truncate_states && *c.policy.truncate_states == 0)
    throw InvalidArgument("truncate_states must be positive");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const CliOverrides& overrides) {
  const auto text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(j, overrides, path.parent_path());
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  auto& cat = j["catalog"];
  cat["n_contents"] = c.catalog.n_contents;
  if (c.catalog.zipf_s) cat["zipf_s"] = *c.catalog.zipf_s;
  else cat["popularity"] = c.catalog.popularity;
  j["cache_size"] = c.cache_size;

  auto& pl = j["placement"];
  pl["method"] = name_of(c.placement.method, kMethods);
  pl["target"] = c.placement.target.empty() ? Json("capped_proportional") : Json(c.placement.target);
  pl["ordering"] = c.placement.ordering;
  pl["eta_file"] = c.placement.eta_file ? Json(c.placement.eta_file->generic_string()) : Json(nullptr);

  auto& po = j["policy"];
  po["omega_scale"] = c.policy.omega_scale;
  po["refine"] = c.policy.refine;
  po["truncate_states"] = c.policy.truncate_states ? Json(*c.policy.truncate_states) : Json(nullptr);
  po["mixing_trials"] = c.policy.mixing_trials;
  po["mixing_threshold"] = c.policy.mixing_threshold;
  po["mixing_t_max"] = c.policy.mixing_t_max;

  const auto& w = c.workload;
  auto& wj = j["workload"];
  wj["kind"] = name_of(w.kind, kKinds);
  wj["n_requests"] = w.n_requests;
  wj["horizon"] = w.horizon;
  wj["zipf_s"] = w.zipf_s ? Json(*w.zipf_s) : Json(nullptr);
  wj["session"] = {{"mode", name_of(w.mode, kModes)}, {"n_sessions", w.n_sessions},
                   {"concentration", w.concentration}, {"magnitude", w.magnitude},
                   {"kappa", w.kappa}, {"laps", w.laps}};
  wj["shot_noise"] = {{"zipf_s", w.shot_noise.zipf_s},
                      {"mean_total_requests", w.shot_noise.mean_total_requests},
                      {"first_request_window", w.shot_noise.first_request_window},
                      {"decay", w.shot_noise.decay},
                      {"pulse_length", w.shot_noise.pulse_length},
                      {"target_lifetime", w.target_lifetime ? Json(*w.target_lifetime) : Json(nullptr)}};
  wj["trace_file"] = w.trace_file.empty() ? Json(nullptr) : Json(w.trace_file.generic_string());

  const auto& s = c.simulation;
  j["simulation"] = {{"policies", s.policies},
                     {"runs", s.runs},
                     {"threads", s.threads},
                     {"phi_source", name_of(s.phi_source, kPhiSources)},
                     {"start", name_of(s.start, kStarts)},
                     {"series_window", s.series_window},
                     {"occupancy_window", s.occupancy_window},
                     {"checkpoint_every", s.checkpoint_every}};
  j["seed"] = c.seed;
  j["state_cap"] = c.state_cap;
  return j;
}

// ---------------------------------------------------------------------------
// Pipeline pieces

PreparedChain prepare_chain(const ExperimentConfig& config, const ContentCatalog& catalog) {
  const std::size_t n = catalog.size(), c = config.cache_size;
  const AcceptanceLimits omega{config.policy.omega_scale};
  PreparedChain out;

  if (config.placement.eta_file) {
    auto [states, eta] = read_eta_csv(read_file(*config.placement.eta_file));
    std::vector<std::size_t> order(states.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return states[a] < states[b]; });
    std::vector<CacheState> sorted;
    std::vector<double> values;
    for (auto i : order) {
      if (states[i].size() != c) throw InvalidArgument("eta file state size differs from cache_size");
      if (states[i].contents.back() > n) throw InvalidArgument("eta file names a content outside the catalog");
      sorted.push_back(states[i]);
      values.push_back(eta[i]);
    }
    const double sum = std::accumulate(values.begin(), values.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("eta file does not sum to 1");
    out.input = ChainInput::from_states(StateSet(n, c, std::move(sorted)), values, catalog, omega);
  } else if (config.policy.truncate_states) {
    std::vector<ContentId> all(n);
    std::iota(all.begin(), all.end(), 1);
    StateSet set(n, c, top_states_by_popularity(catalog, all, c, *config.policy.truncate_states));
    const auto eta = state_popularity_eta(catalog, set);
    out.input = ChainInput::from_states(set, eta.probs, catalog, omega);
  } else {
    out.space = StateSpace::enumerate(n, c, config.state_cap);
    StateDistribution eta;
    if (config.placement.method == PlacementSpec::Method::StatePopularity) {
      eta = state_popularity_eta(catalog, StateSet::all_of(*out.space));
    } else {
      const PlacementTarget target = config.placement.target.empty()
                                         ? PlacementTarget::capped_proportional(catalog, c)
                                         : PlacementTarget{config.placement.target};
      target.validate();
      if (target.size() != n || target.cache_size() != c)
        throw InvalidArgument("placement target must have n_contents entries summing to cache_size");
      eta = config.placement.method == PlacementSpec::Method::Solver
                ? solve_eta(target, *out.space)
                : block_filling_eta(target, *out.space, config.placement.ordering);
    }
    out.full_eta = eta;
    out.input = ChainInput::from_distribution(*out.space, eta, catalog, omega);
  }
  out.chain = compile_chain(out.input, config.policy.refine);
  return out;
}

CacheState most_popular_state(std::span<const double> phi, std::size_t cache_size) {
  if (cache_size > phi.size()) throw InvalidArgument("cache larger than the catalog");
  std::vector<ContentId> ids(phi.size());
  std::iota(ids.begin(), ids.end(), 1);
  std::stable_sort(ids.begin(), ids.end(), [&](ContentId a, ContentId b) { return phi[a - 1] > phi[b - 1]; });
  ids.resize(cache_size);
  std::sort(ids.begin(), ids.end());
  return CacheState{ids};
}

SessionSchedule make_schedule(const ExperimentConfig& config, const ContentCatalog& catalog, std::uint64_t seed) {
  const auto& w = config.workload;
  auto schedule = w.mode == VariationMode::RandomFluctuation
                      ? random_fluctuation_schedule(catalog.popularity(), w.n_sessions, w.concentration,
                                                    w.magnitude, splitmix64(seed))
                      : smooth_change_schedule(catalog.size(), w.n_sessions, w.kappa, w.magnitude, w.laps);
  schedule.validate(catalog.popularity());
  return schedule;
}

RequestTrace make_workload(const ExperimentConfig& config, const ContentCatalog& catalog, std::uint64_t seed) {
  const auto& w = config.workload;
  const std::size_t n = catalog.size();
  switch (w.kind) {
    case WorkloadSpec::Kind::StaticZipf:
      if (w.zipf_s) return gen_static_zipf(n, *w.zipf_s, w.n_requests, seed, w.horizon);
      return gen_from_popularity(catalog.popularity(), w.n_requests, seed, w.horizon);
    case WorkloadSpec::Kind::Session:
      return gen_session_varying(make_schedule(config, catalog, seed), w.n_requests, splitmix64(seed + 1), w.horizon);
    case WorkloadSpec::Kind::ShotNoise: {
      auto cfg = w.shot_noise;
      if (w.target_lifetime) cfg = calibrate_decay(cfg, n, *w.target_lifetime);
      return gen_shot_noise(cfg, n, seed);
    }
    case WorkloadSpec::Kind::TraceFile: {
      std::istringstream is(read_file(w.trace_file));
      return read_trace_csv(is, n, w.horizon);
    }
  }
  throw InvariantViolation("unhandled workload kind");
}

// ---------------------------------------------------------------------------
// Commands

namespace {

OutputHeader header_for(const std::string& command, const ExperimentConfig& config) {
  return {command, config_hash(to_json(config)), config.seed};
}

Json sequences_json(const SequenceDecomposition& dec) {
  Json list = Json::array();
  for (const auto& s : dec.sequences) {
    list.push_back({{"states", s.states},
                    {"branch", s.branch ? Json(*s.branch) : Json(nullptr)},
                    {"merge", s.merge ? Json(*s.merge) : Json(nullptr)}});
  }
  return list;
}

}  // namespace

void cmd_placement(const ExperimentConfig& config) {
  const auto catalog = config.catalog.build();
  const auto header = header_for("placement", config);
  const PlacementTarget target = config.placement.target.empty()
                                     ? PlacementTarget::capped_proportional(catalog, config.cache_size)
                                     : PlacementTarget{config.placement.target};
  target.validate();
  if (target.size() != catalog.size() || target.cache_size() != config.cache_size)
    throw InvalidArgument("placement target must have n_contents entries summing to cache_size");
  const auto space = StateSpace::enumerate(catalog.size(), config.cache_size, config.state_cap);

  Json report{{"header", to_json(header)}, {"target", target.probs}, {"n_states", space.size()}};
  auto emit = [&](const std::string& name, const StateDistribution& eta) {
    const auto r = validate_eta(eta, target, space);
    // Independent check of S eta = p, one state at a time.
    std::vector<double> p(catalog.size(), 0.0);
    for (StateIndex l = 0; l < space.size(); ++l)
      if (eta.probs[l] != 0.0)
        for (ContentId k : space.state(l).contents) p[k - 1] += eta.probs[l];
    double residual = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) residual = std::max(residual, std::abs(p[k] - target.probs[k]));
    const auto support = StateSet::support_of(space, eta.probs);
    std::vector<double> values;
    for (auto l : *support.canonical_indices()) values.push_back(eta.probs[l]);
    write_file(config.output / ("eta_" + name + ".csv"), eta_csv(header, support, values));
    auto j = to_json(r);
    j["support_size"] = support.size();
    j["recomputed_residual_inf"] = residual;
    report[name] = j;
    if (!r.ok() || residual > tolerance::kResidual)
      throw InvariantViolation(name + " placement failed validation");
  };
  emit("solver", solve_eta(target, space));
  emit("block_filling", block_filling_eta(target, space, config.placement.ordering));
  write_file(config.output / "placement.json", json_text(report));
}

void cmd_policy(const ExperimentConfig& config) {
  const auto catalog = config.catalog.build();
  const auto header = header_for("policy", config);
  const auto prep = prepare_chain(config, catalog);
  const auto& in = prep.input;

  write_file(config.output / "states.csv", eta_csv(header, in.states, in.eta));
  write_file(config.output / "theta_basic.csv", theta_csv(header, prep.chain.basic));
  write_file(config.output / "theta.csv", theta_csv(header, prep.chain.theta));
  write_file(config.output / "tau.csv", tau_csv(header, prep.chain.policy));

  const auto basic = verify_theorem1(prep.chain.basic, in);
  const auto final_report = verify_theorem1(prep.chain.theta, in);
  Json j{{"header", to_json(header)},
         {"n_states", in.size()},
         {"refined", config.policy.refine},
         {"sequences", sequences_json(prep.chain.decomposition)},
         {"splits", prep.chain.decomposition.splits},
         {"connection_points", prep.chain.decomposition.connection_points},
         {"verification", {{"basic", to_json(basic)}, {"final", to_json(final_report)}}}};
  if (config.policy.mixing_trials > 0) {
    const auto mb = mixing_report(prep.chain.basic, in.eta, config.policy.mixing_trials,
                                  config.policy.mixing_threshold, config.seed, config.policy.mixing_t_max);
    const auto mf = mixing_report(prep.chain.theta, in.eta, config.policy.mixing_trials,
                                  config.policy.mixing_threshold, config.seed, config.policy.mixing_t_max);
    j["mixing"] = {{"basic", to_json(mb)}, {"final", to_json(mf)}};
  }
  write_file(config.output / "policy.json", json_text(j));
  if (!final_report.all()) throw InvariantViolation("generated chain failed verification; see policy.json");
}

ComparisonTables comparison_tables(const OutputHeader& header, const std::vector<ComparisonRow>& rows) {
  CsvWriter summary(header, {"policy", "runs", "hit_ratio_mean", "hit_ratio_ci95", "replacements_mean",
                             "replacements_ci95", "misses_mean", "uncacheable_mean"});
  CsvWriter runs(header, {"policy", "run", "seed", "requests", "hits", "misses", "replacements", "uncacheable",
                          "hit_ratio"});
  CsvWriter series(header, {"policy", "run", "window", "requests", "hits", "hit_ratio"});
  CsvWriter checkpoints(header, {"policy", "run", "request", "squared_distance"});
  for (const auto& row : rows) {
    double misses = 0.0, uncacheable = 0.0;
    for (std::size_t r = 0; r < row.results.size(); ++r) {
      const auto& res = row.results[r];
      misses += static_cast<double>(res.misses) / static_cast<double>(row.results.size());
      uncacheable += static_cast<double>(res.uncacheable) / static_cast<double>(row.results.size());
      runs.cell(row.policy).cell(std::uint64_t{r}).cell(res.seed).cell(std::uint64_t{res.requests});
      runs.cell(std::uint64_t{res.hits}).cell(std::uint64_t{res.misses}).cell(std::uint64_t{res.replacements});
      runs.cell(std::uint64_t{res.uncacheable}).cell(res.hit_ratio());
      runs.end_row();
      for (std::size_t w = 0; w < res.series.size(); ++w) {
        series.cell(row.policy).cell(std::uint64_t{r}).cell(std::uint64_t{w});
        series.cell(std::uint64_t{res.series[w].requests}).cell(std::uint64_t{res.series[w].hits});
        series.cell(res.series[w].hit_ratio());
        series.end_row();
      }
      for (const auto& cp : res.checkpoints) {
        checkpoints.cell(row.policy).cell(std::uint64_t{r}).cell(std::uint64_t{cp.request}).cell(cp.squared_distance);
        checkpoints.end_row();
      }
    }
    summary.cell(row.policy).cell(std::uint64_t{row.runs}).cell(row.hit_ratio.mean).cell(row.hit_ratio.ci95);
    summary.cell(row.replacements.mean).cell(row.replacements.ci95).cell(misses).cell(uncacheable);
    summary.end_row();
  }
  return {summary.str(), runs.str(), series.str(), checkpoints.str()};
}

std::vector<ComparisonRow> run_simulation(const ExperimentConfig& config) {
  const auto catalog = config.catalog.build();
  const auto& sim = config.simulation;
  const std::size_t c = config.cache_size;
  const bool empirical = sim.phi_source == SimulationSpec::PhiSource::Empirical;

  // Trace files are read once and shared by every run.
  std::optional<RequestTrace> fixed_trace;
  if (config.workload.kind == WorkloadSpec::Kind::TraceFile) fixed_trace = make_workload(config, catalog, 0);

  const bool needs_chain =
      std::any_of(sim.policies.begin(), sim.policies.end(), [](const std::string& p) { return p == "proposed"; }) ||
      sim.start == SimulationSpec::StartState::Sample;
  std::shared_ptr<const PreparedChain> shared;
  if (needs_chain && !empirical) shared = std::make_shared<const PreparedChain>(prepare_chain(config, catalog));

  auto chain_for = [&](const RequestTrace& trace) -> std::shared_ptr<const PreparedChain> {
    if (!empirical) return shared;
    if (trace.size() == 0) return std::make_shared<const PreparedChain>(prepare_chain(config, catalog));
    return std::make_shared<const PreparedChain>(
        prepare_chain(config, ContentCatalog(empirical_popularity_range(trace, 0, trace.size()))));
  };
  auto start_for = [&](const RequestTrace& trace, const PreparedChain* chain, Rng& rng) {
    if (sim.start == SimulationSpec::StartState::Sample)
      return draw_initial_state(chain->input.states, chain->input.eta, rng);
    if (empirical && trace.size() > 0)
      return most_popular_state(empirical_popularity_range(trace, 0, trace.size()), c);
    return most_popular_state(catalog.popularity(), c);
  };

  std::vector<PolicyEntry> entries;
  for (const auto& name : sim.policies) {
    entries.push_back({name, [&, name](const RequestTrace& trace, Rng& rng) {
                         const bool uses_chain = name == "proposed" || sim.start == SimulationSpec::StartState::Sample;
                         auto chain = uses_chain ? chain_for(trace) : nullptr;
                         PolicySetup setup;
                         setup.initial = start_for(trace, chain.get(), rng);
                         if (name == "proposed") {
                           auto policy = std::shared_ptr<const ReplacementPolicy>(chain, &chain->chain.policy);
                           setup.policy = std::make_unique<ProposedPolicy>(policy);
                           // The proposed chain must start inside its own state set.
                           if (!chain->input.states.find(setup.initial.contents))
                             setup.initial = draw_initial_state(chain->input.states, chain->input.eta, rng);
                         } else if (name == "static") {
                           setup.policy = std::make_unique<StaticPolicy>(c);
                         } else if (name == "lru") {
                           setup.policy = make_lru(c);
                         } else {
                           setup.policy = make_lfu(c);
                         }
                         return setup;
                       }});
  }

  CompareOptions opt;
  opt.n_runs = sim.runs;
  opt.seed = config.seed;
  opt.threads = sim.threads;
  std::optional<StateSet> occupancy;
  if (sim.occupancy_window > 0) {
    if (!shared) throw InvalidArgument("occupancy tracking needs the proposed policy or sampled starts");
    if (shared->space) {
      occupancy = StateSet::all_of(*shared->space);
      opt.run.target_eta = shared->full_eta->probs;
    } else {
      occupancy = shared->input.states;
      opt.run.target_eta = shared->input.eta;
    }
    opt.run.occupancy_states = &*occupancy;
    opt.run.occupancy_window = sim.occupancy_window;
    opt.run.checkpoint_every = sim.checkpoint_every;
  }

  auto make_trace = [&](std::size_t, std::uint64_t seed) {
    return fixed_trace ? *fixed_trace : make_workload(config, catalog, seed);
  };
  // Series windows depend only on the trace length, which is fixed for
  // generated static and session workloads.
  const auto& w = config.workload;
  const bool fixed_length = w.kind != WorkloadSpec::Kind::ShotNoise;
  const std::size_t length = fixed_trace ? fixed_trace->size() : w.n_requests;
  if (fixed_length && length > 0) {
    if (sim.series_window > 0) {
      for (std::size_t b = 0; b < length; b += sim.series_window) opt.run.series_boundaries.push_back(b);
      opt.run.series_boundaries.push_back(length);
    } else if (w.kind == WorkloadSpec::Kind::Session) {
      opt.run.series_boundaries = session_boundaries(w.n_sessions, length);
    }
  }

  return compare(entries, make_trace, opt);
}

void cmd_simulate(const ExperimentConfig& config) {
  const auto header = header_for("simulate", config);
  const auto rows = run_simulation(config);
  const auto tables = comparison_tables(header, rows);
  write_file(config.output / "summary.csv", tables.summary);
  write_file(config.output / "runs.csv", tables.runs);
  write_file(config.output / "series.csv", tables.series);
  if (config.simulation.occupancy_window > 0 && config.simulation.checkpoint_every > 0)
    write_file(config.output / "checkpoints.csv", tables.checkpoints);

  Json j{{"header", to_json(header)}, {"config", to_json(config)}};
  for (const auto& row : rows)
    j["policies"][row.policy] = {{"runs", row.runs},
                                 {"hit_ratio", {{"mean", row.hit_ratio.mean}, {"ci95", row.hit_ratio.ci95}}},
                                 {"replacements", {{"mean", row.replacements.mean}, {"ci95", row.replacements.ci95}}}};
  write_file(config.output / "summary.json", json_text(j));
}

}  // namespace dpc
