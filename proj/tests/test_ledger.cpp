#include <doctest.h>

#include "simloop/ledger.hpp"
#include "simloop/reference.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace simloop;
namespace fs = std::filesystem;

namespace {

CandidateVersion version(int id, Origin origin, std::optional<int> parent, int passed, bool executable = true) {
  CandidateVersion c;
  c.id = id;
  c.initiation = id;
  c.origin = origin;
  c.parent = parent;
  c.source = "controller gold";
  c.report.passed_count = passed;
  c.report.total = 7;
  c.statuses.assign(7, ExecutabilityStatus::ok());
  if (!executable) {
    c.report.non_executable_tcs = {"TC3"};
    c.statuses[2] = ExecutabilityStatus::runtime("boom", 4);
  }
  return c;
}

// 14 executable corrections: deltas sum to 9, the 5 positive ones to 13.
RunLedger correction_ledger() {
  const int deltas[] = {3, 3, 3, 2, 2, -1, -1, -1, -1, 0, 0, 0, 0, 0};
  RunLedger l;
  int id = 1;
  for (int d : deltas) {
    const int parent_p = d > 0 ? 1 : 4;
    l.candidates.push_back(version(id, Origin::kInitial, std::nullopt, parent_p));
    l.candidates.push_back(version(id + 1, Origin::kCorrection, id, parent_p + d));
    id += 2;
  }
  return l;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("percentages keep two significant figures") {
  CHECK(format_percent(9.0 / 98.0) == "9.2%");
  CHECK(format_percent(13.0 / 35.0) == "37%");
  // rounds half up, not down
  CHECK(format_percent(5.0 / 14.0) == "36%");
  CHECK(format_percent(6.0 / 20.0) == "30%");
  CHECK(format_percent(1.0) == "100%");
  CHECK(format_percent(0.0) == "0%");
  CHECK(format_percent(0.004) == "0.40%");
}

TEST_CASE("correction statistics") {
  const auto s = compute_stats(correction_ledger());
  CHECK(s.corrections_fully_executable == 14);
  CHECK(s.improving_corrections == 5);
  CHECK(s.mean_delta_P_all_corrections == doctest::Approx(9.0 / 98.0));
  CHECK(s.mean_delta_P_improving_only == doctest::Approx(13.0 / 35.0));
  CHECK(s.mean_delta_P_all_raw == doctest::Approx(9.0 / 14.0));
  CHECK(format_percent(s.mean_delta_P_all_corrections) == "9.2%");
  CHECK(format_percent(s.mean_delta_P_improving_only) == "37%");
}

TEST_CASE("initial success rate") {
  RunLedger l;
  for (int i = 1; i <= 20; ++i) l.candidates.push_back(version(i, Origin::kInitial, std::nullopt, i <= 6 ? 7 : 3));
  const auto s = compute_stats(l);
  CHECK(s.successful_initial == 6);
  CHECK(s.initial_count == 20);
  CHECK(format_percent(s.success_rate_initial) == "30%");
  CHECK(render_stats(s).find("success rate, initial versions: 30% (6 of 20)") != std::string::npos);
}

TEST_CASE("corrections of non-executable parents are not counted") {
  RunLedger l;
  l.candidates.push_back(version(1, Origin::kInitial, std::nullopt, 3, false));
  l.candidates.push_back(version(2, Origin::kCorrection, 1, 7));
  l.candidates.push_back(version(3, Origin::kInitial, std::nullopt, 3));
  l.candidates.push_back(version(4, Origin::kCorrection, 3, 5, false));
  const auto s = compute_stats(l);
  CHECK(s.corrections_attempted == 1);
  CHECK(s.corrections_fully_executable == 0);
  CHECK(s.mean_delta_P_all_corrections == 0.0);
  CHECK_THROWS_AS(compute_stats(RunLedger{}), StatsError);
  l.candidates.push_back(version(5, Origin::kCorrection, 99, 5));
  CHECK_THROWS_AS(compute_stats(l), StatsError);
}

TEST_CASE("compilable candidates") {
  RunLedger l;
  l.candidates.push_back(version(1, Origin::kInitial, std::nullopt, 3));
  auto syntax = version(2, Origin::kInitial, std::nullopt, 0, false);
  syntax.statuses.assign(7, ExecutabilityStatus::syntax("line 1: bad"));
  l.candidates.push_back(syntax);
  l.candidates.push_back(version(3, Origin::kInitial, std::nullopt, 5, false));  // runtime failure still compiles
  CHECK(compute_stats(l).compilable_count == 2);
}

TEST_CASE("candidate JSON round-trip") {
  auto c = version(4, Origin::kCorrection, 3, 5);
  c.prompt = "p";
  c.reply = "r";
  c.gateway_error = "e";
  c.trace_digests = {{"TC1", "abc"}};
  c.flagged_regression = true;
  auto back = candidate_from_json(to_json(c));
  // Texts live in their own files, not in candidate.json.
  CHECK(back.source.empty());
  back.source = c.source;
  back.prompt = c.prompt;
  back.reply = c.reply;
  back.report = c.report;
  CHECK(back == c);
}

TEST_CASE("ledger save and load") {
  const auto cfg = load_pipeline_config(std::string(SIMLOOP_SOURCE_DIR) + "/demo/scripted_session/config.json");
  const auto ledger = run_pipeline(cfg);
  const auto dir = fresh_dir("simloop_ledger_test");
  save_ledger(ledger, dir);
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(candidate_dir(dir, 26) / "traces" / "TC1.csv"));
  CHECK(slurp(candidate_dir(dir, 26) / "source") == ledger.candidates.back().source);

  std::istringstream baseline(slurp(dir / "baseline.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(baseline, line)) ++lines;
  CHECK(lines == 4);

  const auto loaded = load_ledger(dir);
  CHECK(loaded.candidates == ledger.candidates);
  CHECK(loaded.promotions == ledger.promotions);
  CHECK(loaded.baseline == ledger.baseline);
  CHECK(loaded.stop_reason == "gold");
  CHECK(compute_stats(loaded) == compute_stats(ledger));

  // Stored trace digests match the files on disk.
  for (const auto& [tc, digest] : ledger.candidates.back().trace_digests)
    CHECK(fnv1a_hex(slurp(candidate_dir(dir, 26) / "traces" / (tc + ".csv"))) == digest);

  CHECK_THROWS_AS(save_ledger(ledger, dir), LedgerError);  // refuses to overwrite
  CHECK_THROWS_AS(load_ledger(dir / "missing"), LedgerError);
  fs::remove_all(dir);
}
