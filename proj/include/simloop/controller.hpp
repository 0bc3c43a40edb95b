#pragma once

// The controller-facing side of a simulation: what a candidate sees each tick,
// what it may command, and how failures are classified.

#include "simloop/scenario.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace simloop {

struct ControlAction {
  double accel = 0.0;
  /// -1 one lane left, 0 keep, +1 one lane right.
  int lane_change = 0;
  bool operator==(const ControlAction&) const = default;
};

struct EgoObservation {
  double s = 0.0;
  double lat = 0.0;
  double speed = 0.0;
  int lane = 0;
  int lane_count = 0;
  double lane_width = 0.0;
  bool operator==(const EgoObservation&) const = default;
};

struct AgentObservation {
  std::string name;
  /// Front-bumper position relative to the ego front bumper; leads are positive.
  double s_relative = 0.0;
  double lat = 0.0;
  int lane = 0;
  double speed = 0.0;
  int heading = 1;
  bool operator==(const AgentObservation&) const = default;
};

struct Observation {
  int tick = 0;
  double time = 0.0;
  EgoObservation ego;
  /// Sorted by |s_relative| ascending, ties by name.
  std::vector<AgentObservation> agents;
  bool operator==(const Observation&) const = default;
};

/// Handshake payload sent to a controller before the first tick.
struct InitMessage {
  std::string scenario_id;
  FunctionMode mode = FunctionMode::kCaem;
  double dt = 0.05;
  int lane_count = 3;
  double lane_width = kLaneWidth;
  double ego_length = kVehicleLength;
  double ego_width = kVehicleWidth;
  std::optional<double> set_speed;
  bool operator==(const InitMessage&) const = default;
};

InitMessage make_init(const ScenarioSpec& spec, double dt);

struct ExecutabilityStatus {
  enum class Kind { kExecutable, kNoCode, kSyntaxError, kRuntimeFailure, kTimeout };

  Kind kind = Kind::kExecutable;
  std::string message;
  std::string tc_id;
  /// Absent for failures before the first tick (handshake).
  std::optional<int> tick;

  bool executable() const { return kind == Kind::kExecutable; }
  bool operator==(const ExecutabilityStatus&) const = default;

  static ExecutabilityStatus ok() { return {}; }
  static ExecutabilityStatus no_code(std::string message = "no code was generated") {
    return {Kind::kNoCode, std::move(message), {}, {}};
  }
  static ExecutabilityStatus syntax(std::string message) {
    return {Kind::kSyntaxError, std::move(message), {}, {}};
  }
  static ExecutabilityStatus runtime(std::string message, std::optional<int> tick = {}) {
    return {Kind::kRuntimeFailure, std::move(message), {}, tick};
  }
  static ExecutabilityStatus timeout(std::optional<int> tick = {}) {
    return {Kind::kTimeout, "controller did not answer in time", {}, tick};
  }
};

std::string_view to_string(ExecutabilityStatus::Kind kind);
ExecutabilityStatus::Kind parse_status_kind(std::string_view text);

/// Thrown by controllers and runtimes; carries the classified status.
class ControllerFailure : public std::runtime_error {
 public:
  explicit ControllerFailure(ExecutabilityStatus status);
  const ExecutabilityStatus& status() const { return status_; }
  ExecutabilityStatus& status() { return status_; }

 private:
  ExecutabilityStatus status_;
};

/// A live controller for one scenario run. Implementations throw ControllerFailure.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControlAction tick(const Observation& obs) = 0;
  /// Ends the session; the controller is unusable afterwards.
  virtual void finish() {}
};

/// Starts controllers from candidate source text.
class ControllerRuntime {
 public:
  virtual ~ControllerRuntime() = default;
  /// Throws ControllerFailure with kNoCode, kSyntaxError or kTimeout.
  virtual std::unique_ptr<Controller> spawn(const std::string& code, const InitMessage& init) = 0;
};

}  // namespace simloop
