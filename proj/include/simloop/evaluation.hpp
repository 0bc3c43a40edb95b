#pragma once

// Runs one candidate over a set of test cases and renders its report.

#include "simloop/controller.hpp"
#include "simloop/oracle.hpp"
#include "simloop/report.hpp"
#include "simloop/sim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace simloop {

struct EvaluationOptions {
  double dt = kDefaultDt;
  OracleConfig oracle;
  /// Run test cases concurrently (one controller per test case either way).
  bool parallel = false;
};

struct CandidateEvaluation {
  /// In the order of the specs given.
  std::vector<TestCaseOutcome> outcomes;
  /// Completed runs only; parallel to `outcomes`.
  std::vector<std::optional<SimTrace>> traces;
  TestReport report;

  /// P: passed test cases (counted over executable ones).
  int passed() const { return report.passed_count; }
  int total() const { return report.total; }
  /// Ne iff some test case did not execute.
  bool fully_executable() const { return report.non_executable_tcs.empty(); }
};

/// Evaluates one test case. Host-level problems (HostError) propagate.
TestCaseOutcome run_test_case(const std::string& code, const ScenarioSpec& spec, ControllerRuntime& runtime,
                              const EvaluationOptions& opts, std::optional<SimTrace>* trace_out = nullptr);

CandidateEvaluation evaluate_candidate(const std::string& candidate_id, const std::string& code,
                                       const std::vector<ScenarioSpec>& specs, ControllerRuntime& runtime,
                                       const EvaluationOptions& opts = {});

}  // namespace simloop
