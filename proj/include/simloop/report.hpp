#pragma once

// Natural-language test reports, as fed back to the code generator.

#include "simloop/controller.hpp"
#include "simloop/oracle.hpp"
#include "simloop/scenario.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace simloop {

/// Everything known about one test case of one candidate.
struct TestCaseOutcome {
  ScenarioSpec spec;
  ExecutabilityStatus status;
  /// Present iff the run completed.
  std::optional<TestCaseResult> result;
};

struct TestCaseSection {
  std::string tc_id;
  std::string description;
  std::string verdict;
  std::vector<std::string> narrative;
  bool passed = false;
  bool executable = true;

  /// Verdict, narrative lines, then a blank line.
  std::string text() const;
  bool operator==(const TestCaseSection&) const = default;
};

struct TestReport {
  std::string candidate_id;
  std::vector<TestCaseSection> per_tc;
  int passed_count = 0;
  int total = 0;
  std::vector<std::string> non_executable_tcs;

  /// Plain text: one block per test case, then the summary line.
  std::string text() const;
  std::string summary_line() const;
  bool operator==(const TestReport&) const = default;
};

std::string render_event(const Event& e);
std::string render_violation(const Violation& v, const ScenarioSpec& spec);
std::string render_verdict(const TestCaseOutcome& outcome);

/// Sections follow catalog order; scenarios outside the catalog come last in input order.
TestReport render_report(const std::string& candidate_id, const std::vector<TestCaseOutcome>& outcomes);

/// Reads P back from a report's summary line; throws std::invalid_argument if absent.
int parse_passed_count(std::string_view report_text);

nlohmann::json to_json(const TestReport& r);
TestReport report_from_json(const nlohmann::json& j);

}  // namespace simloop
