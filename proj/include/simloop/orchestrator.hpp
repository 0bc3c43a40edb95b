#pragma once

// The generate / evaluate / correct loop with best-so-far baseline selection.

#include "simloop/evaluation.hpp"
#include "simloop/host.hpp"
#include "simloop/llm.hpp"
#include "simloop/oracle.hpp"
#include "simloop/report.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace simloop {

enum class Transport { kInProcess, kProcess };
std::string_view to_string(Transport t);
Transport parse_transport(std::string_view text);

struct PipelineConfig {
  int initiations_max = 20;
  int correction_depth = 1;
  bool stop_on_gold = true;
  FunctionMode mode = FunctionMode::kCaem;
  /// Catalog ids; empty means every catalog test case of `mode`.
  std::vector<std::string> test_cases;
  ModelConfig model;
  double dt = kDefaultDt;
  OracleConfig oracle;
  Transport transport = Transport::kInProcess;
  RuntimeConfig runtime;
  bool parallel_tests = false;
  /// Generate initiations concurrently; candidate ids still follow initiation order.
  bool parallel_initiations = false;
  /// Replace the built-in prompt texts when non-empty.
  std::string context_text;
  std::string task_text;

  /// Throws std::invalid_argument.
  void validate() const;
  std::vector<std::string> resolved_test_cases() const;
};

nlohmann::json to_json(const PipelineConfig& c);
/// Relative paths in the model section resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::string& base_dir = {});
PipelineConfig load_pipeline_config(const std::string& path);

enum class Origin { kInitial, kCorrection };

struct CandidateVersion {
  int id = 0;
  int initiation = 0;
  Origin origin = Origin::kInitial;
  /// Correction parent id.
  std::optional<int> parent;
  std::string prompt;
  std::string reply;
  /// Extracted code; empty when none was found.
  std::string source;
  /// Gateway failure, when the model could not be queried.
  std::optional<std::string> gateway_error;
  std::vector<ExecutabilityStatus> statuses;
  std::vector<TestCaseResult> results;
  TestReport report;
  /// FNV-1a digest of each stored trace CSV, by test case.
  std::map<std::string, std::string> trace_digests;
  bool flagged_regression = false;

  std::string name() const { return "C" + std::to_string(id); }
  int passed() const { return report.passed_count; }
  int total() const { return report.total; }
  bool executable() const { return report.non_executable_tcs.empty(); }
  bool gold() const { return executable() && passed() == total() && total() > 0; }
  bool operator==(const CandidateVersion&) const = default;
};

struct BaselineState {
  std::optional<int> current;
  int passed = 0;
  bool gold = false;
  bool operator==(const BaselineState&) const = default;
};

struct Promotion {
  int candidate = 0;
  int passed = 0;
  bool gold = false;
  bool operator==(const Promotion&) const = default;
};

struct RunLedger {
  PipelineConfig config;
  std::vector<CandidateVersion> candidates;
  std::vector<Promotion> promotions;
  BaselineState baseline;
  int initiations_completed = 0;
  std::string stop_reason;
  /// Stored traces by candidate id; same order as the candidate's test cases.
  std::map<int, std::vector<std::optional<SimTrace>>> traces;

  const CandidateVersion* find(int id) const;
};

/// Pure baseline update; Ne candidates never replace the baseline, ties keep it.
BaselineState compare_to_baseline(const CandidateVersion& candidate, const BaselineState& baseline);

struct RegressionClass {
  enum class Kind { kImproved, kUnchanged, kRegressed, kNonExecutable };
  Kind kind = Kind::kUnchanged;
  int delta = 0;
  bool operator==(const RegressionClass&) const = default;
};
std::string_view to_string(RegressionClass::Kind k);

RegressionClass classify_regression(const CandidateVersion& parent, const CandidateVersion& child);

/// Optional progress callback, called after each evaluated candidate.
using ProgressFn = std::function<void(const CandidateVersion&, const BaselineState&)>;

RunLedger run_pipeline(const PipelineConfig& cfg, ModelGateway& gateway, ControllerRuntime& runtime,
                       const ProgressFn& progress = {});

/// Builds the gateway and runtime from the config.
RunLedger run_pipeline(const PipelineConfig& cfg, const ProgressFn& progress = {});

std::unique_ptr<ControllerRuntime> make_runtime(const PipelineConfig& cfg);

std::string fnv1a_hex(std::string_view data);

}  // namespace simloop
