#pragma once

// Safety requirements and expected-outcome checks over a simulation trace.

#include "simloop/scenario.hpp"
#include "simloop/sim.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace simloop {

enum class Requirement {
  kSR1,  // collision
  kSR2,  // left the drivable area
  kSR3,  // unintended lane change
  kForbiddenLaneChange,
  kTimeGapOutOfRange,
  kSetSpeedNotReached,
  kExpectedManoeuvreMissing,
};

std::string_view to_string(Requirement r);
Requirement parse_requirement(std::string_view text);

struct OracleConfig {
  /// A lane change is intended if a lead had TTC or headway below these...
  double imminent_ttc = 4.0;
  double imminent_headway = 0.75;
  /// ...at some frame in [start - window, start].
  double intent_window = 3.0;
  /// ACC: trailing window over which the time gap must stay in range.
  double settle_window = 5.0;
  double set_speed_tolerance = 0.5;
  bool operator==(const OracleConfig&) const = default;
};

struct Violation {
  Requirement requirement = Requirement::kSR1;
  /// The trace event behind the violation; absent for trace-wide findings.
  std::optional<Event> event;
  /// Measured quantity for threshold checks (time gap s, final speed m/s).
  std::optional<double> measured;
  bool operator==(const Violation&) const = default;
};

struct Metrics {
  std::optional<double> min_ttc;
  std::optional<double> min_headway;
  /// Completion times of ego lane changes.
  std::vector<double> lane_change_times;
  bool operator==(const Metrics&) const = default;
};

struct TestCaseResult {
  std::string tc_id;
  bool passed = true;
  std::vector<Violation> violations;
  /// Findings that do not affect `passed`.
  std::vector<Violation> advisories;
  Metrics metrics;
  bool operator==(const TestCaseResult&) const = default;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TestCaseResult evaluate(const SimTrace& trace, const ScenarioSpec& spec, const OracleConfig& cfg = {});

/// Nearest same-lane, same-direction vehicle whose front is ahead of the ego front.
const VehicleState* find_lead(const TraceFrame& frame, double lane_width);

/// Gap (lead rear - ego front) over ego speed; absent without a lead, at
/// standstill or when the gap is not positive.
std::optional<double> compute_headway(const TraceFrame& frame, double lane_width = kLaneWidth);

/// Gap over closing speed; absent without a lead, when not closing or when the
/// gap is not positive.
std::optional<double> compute_ttc(const TraceFrame& frame, double lane_width = kLaneWidth);

/// Lane-change completion events that had no imminent collision ahead around their start.
std::vector<Event> detect_unintended_lane_change(const SimTrace& trace, const ScenarioSpec& spec,
                                                 const OracleConfig& cfg = {});

nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Violation& v);
Violation violation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TestCaseResult& r);
TestCaseResult result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OracleConfig& c);
OracleConfig oracle_config_from_json(const nlohmann::json& j);

}  // namespace simloop
