#pragma once

// Artifact files: CSV tables with a '#' header block, JSON reports.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dpc/placement.hpp"
#include "dpc/policy.hpp"
#include "dpc/simulator.hpp"
#include "dpc/spectral.hpp"

namespace dpc {

using Json = nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes);
/// FNV-1a of the compact dump; keys are sorted, so equal configs hash equal.
std::uint64_t config_hash(const Json& config);

struct OutputHeader {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// Shortest round-trip decimal form.
std::string format_double(double v);
/// Ids joined by spaces, e.g. "1 4 7".
std::string format_state(const CacheState& s);
CacheState parse_state(std::string_view text);

/// Creates parent directories. Throws Error when the file cannot be opened.
void write_file(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

class CsvWriter {
 public:
  CsvWriter(const OutputHeader& header, std::vector<std::string> columns);

  CsvWriter& cell(std::string_view text);
  CsvWriter& cell(double v);
  CsvWriter& cell(std::uint64_t v);
  void end_row();

  std::string str() const { return out_; }

 private:
  std::size_t columns_;
  std::size_t in_row_ = 0;
  std::string out_;
};

/// state,contents,eta. The state column holds the index in the full space
/// when the set came from one.
std::string eta_csv(const OutputHeader& header, const StateSet& states, std::span<const double> eta);
/// Reads eta_csv output: the states with positive mass and their eta.
std::pair<std::vector<CacheState>, std::vector<double>> read_eta_csv(std::string_view text);
/// row,col,value over the nonzero entries, column-major.
std::string theta_csv(const OutputHeader& header, const TransitionMatrix& theta);
/// from,to,content,tau
std::string tau_csv(const OutputHeader& header, const ReplacementPolicy& policy);

Json to_json(const EtaReport& r);
Json to_json(const Theorem1Report& r);
/// Omits per-trial iteration counts.
Json to_json(const MixingReport& r);
Json to_json(const OutputHeader& h);

/// Pretty JSON with a trailing newline.
std::string json_text(const Json& j);

}  // namespace dpc
