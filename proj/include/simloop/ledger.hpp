#pragma once

// Run ledger persistence and run statistics.
//
// Layout of a ledger directory:
//   config.json
//   candidates/C<k>/{source, prompt.txt, reply.txt, report.txt, report.json, candidate.json,
//                    traces/<TC>.csv, traces/<TC>.events.jsonl}
//   baseline.jsonl   one promotion per line
//   summary.json

#include "simloop/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace simloop {

class LedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunStats {
  int total_candidates = 0;
  /// Candidates whose code started in every test case (no NoCode / SyntaxError).
  int compilable_count = 0;
  int initial_count = 0;
  int successful_initial = 0;
  /// Corrections whose parent was fully executable.
  int corrections_attempted = 0;
  int successful_corrected = 0;
  double success_rate_initial = 0.0;
  double success_rate_correction = 0.0;
  /// Corrections where parent and child are both fully executable.
  int corrections_fully_executable = 0;
  int improving_corrections = 0;
  /// Mean of (P_child - P_parent) / total test cases.
  double mean_delta_P_all_corrections = 0.0;
  double mean_delta_P_improving_only = 0.0;
  /// Same means without the normalisation.
  double mean_delta_P_all_raw = 0.0;
  double mean_delta_P_improving_raw = 0.0;
  bool operator==(const RunStats&) const = default;
};

/// Throws StatsError on an empty ledger.
RunStats compute_stats(const RunLedger& ledger);

nlohmann::json to_json(const RunStats& s);
/// Human-readable summary; percentages rounded to two significant figures.
std::string render_stats(const RunStats& s);
std::string format_percent(double fraction);

nlohmann::json to_json(const CandidateVersion& c);
CandidateVersion candidate_from_json(const nlohmann::json& j);

void save_ledger(const RunLedger& ledger, const std::filesystem::path& dir);
/// Traces are not loaded; use load_trace on the candidate's traces directory.
RunLedger load_ledger(const std::filesystem::path& dir);

std::filesystem::path candidate_dir(const std::filesystem::path& ledger_dir, int id);

}  // namespace simloop
