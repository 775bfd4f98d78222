#include "dpc/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dpc/errors.hpp"

namespace dpc {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const Json& config) { return fnv1a64(config.dump()); }

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_state(const CacheState& s) {
  std::string out;
  for (std::size_t i = 0; i < s.contents.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(s.contents[i]);
  }
  return out;
}

CacheState parse_state(std::string_view text) {
  CacheState s;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    if (i == text.size()) break;
    ContentId k = 0;
    auto res = std::from_chars(text.data() + i, text.data() + text.size(), k);
    if (res.ec != std::errc() || k == 0) throw InvalidArgument("malformed state: " + std::string(text));
    s.contents.push_back(k);
    i = static_cast<std::size_t>(res.ptr - text.data());
  }
  for (std::size_t j = 1; j < s.contents.size(); ++j)
    if (s.contents[j - 1] >= s.contents[j]) throw InvalidArgument("state ids must increase: " + std::string(text));
  return s;
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!os) throw Error("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// CSV

CsvWriter::CsvWriter(const OutputHeader& header, std::vector<std::string> columns) : columns_(columns.size()) {
  out_ += "# dpc " + header.command + "\n";
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(header.config_hash));
  out_ += "# config_hash " + std::string(hash) + "\n";
  out_ += "# seed " + std::to_string(header.seed) + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ += ',';
    out_ += columns[i];
  }
  out_ += '\n';
}

CsvWriter& CsvWriter::cell(std::string_view text) {
  if (in_row_++) out_ += ',';
  if (text.find_first_of(",\"\n") != std::string_view::npos) {
    out_ += '"';
    for (char ch : text) {
      if (ch == '"') out_ += '"';
      out_ += ch;
    }
    out_ += '"';
  } else {
    out_ += text;
  }
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(format_double(v))); }
CsvWriter& CsvWriter::cell(std::uint64_t v) { return cell(std::string_view(std::to_string(v))); }

void CsvWriter::end_row() {
  if (in_row_ != columns_) throw InvariantViolation("CSV row has the wrong number of cells");
  out_ += '\n';
  in_row_ = 0;
}

std::string eta_csv(const OutputHeader& header, const StateSet& states, std::span<const double> eta) {
  if (eta.size() != states.size()) throw InvalidArgument("eta length differs from the state count");
  CsvWriter w(header, {"state", "contents", "eta"});
  const auto& canonical = states.canonical_indices();
  for (std::size_t l = 0; l < states.size(); ++l) {
    w.cell(static_cast<std::uint64_t>(canonical ? (*canonical)[l] : l)).cell(format_state(states.state(l))).cell(eta[l]);
    w.end_row();
  }
  return w.str();
}

std::pair<std::vector<CacheState>, std::vector<double>> read_eta_csv(std::string_view text) {
  std::vector<CacheState> states;
  std::vector<double> eta;
  std::istringstream is{std::string(text)};
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "state,contents,eta") throw InvalidArgument("unexpected eta header: " + line);
      header = true;
      continue;
    }
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b) throw InvalidArgument("malformed eta line: " + line);
    double v = 0.0;
    auto res = std::from_chars(line.data() + b + 1, line.data() + line.size(), v);
    if (res.ec != std::errc()) throw InvalidArgument("malformed eta value: " + line);
    if (v <= 0.0) continue;
    states.push_back(parse_state(std::string_view(line).substr(a + 1, b - a - 1)));
    eta.push_back(v);
  }
  if (!header) throw InvalidArgument("eta file has no header");
  return {std::move(states), std::move(eta)};
}

std::string theta_csv(const OutputHeader& header, const TransitionMatrix& theta) {
  CsvWriter w(header, {"row", "col", "value"});
  for (const auto& t : theta.triplets()) {
    w.cell(static_cast<std::uint64_t>(t.row)).cell(static_cast<std::uint64_t>(t.col)).cell(t.value);
    w.end_row();
  }
  return w.str();
}

std::string tau_csv(const OutputHeader& header, const ReplacementPolicy& policy) {
  CsvWriter w(header, {"from", "to", "content", "tau"});
  for (std::size_t m = 0; m < policy.size(); ++m)
    for (const auto& mv : policy.moves(m)) {
      w.cell(static_cast<std::uint64_t>(m)).cell(static_cast<std::uint64_t>(mv.to));
      w.cell(static_cast<std::uint64_t>(mv.content)).cell(mv.tau);
      w.end_row();
    }
  return w.str();
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const EtaReport& r) {
  return Json{{"ok", r.ok()},
              {"residual_inf", r.residual_inf},
              {"sum_error", r.sum_error},
              {"min_entry", r.min_entry},
              {"max_entry", r.max_entry},
              {"simplex_violations", r.simplex_violations},
              {"support_violations", r.support_violations}};
}

Json to_json(const Theorem1Report& r) {
  return Json{{"all", r.all()},
              {"stochastic", r.stochastic},
              {"max_column_error", r.max_column_error},
              {"min_entry", r.min_entry},
              {"max_entry", r.max_entry},
              {"neighbor_structure", r.neighbor_structure},
              {"tau_bounds", r.tau_bounds},
              {"max_tau", r.max_tau},
              {"max_tau_sum", r.max_tau_sum},
              {"max_offdiag_over_phi", r.max_offdiag_over_phi},
              {"fixed_point", r.fixed_point},
              {"fixed_point_error", r.fixed_point_error},
              {"irreducible", r.irreducible},
              {"aperiodic", r.aperiodic},
              {"period", r.period},
              {"converges", r.converges},
              {"limit_tv", r.limit_tv}};
}

Json to_json(const MixingReport& r) {
  Json j{{"threshold", r.threshold}, {"trials", r.trials}, {"converged", r.converged},
         {"mean", r.mean},           {"median", r.median}, {"min", r.min},
         {"max", r.max}};
  j["slem"] = r.slem ? Json(*r.slem) : Json(nullptr);
  return j;
}

Json to_json(const OutputHeader& h) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(h.config_hash));
  return Json{{"command", h.command}, {"config_hash", hash}, {"seed", h.seed}};
}

std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace dpc
