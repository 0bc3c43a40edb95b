#pragma once

// Fixed-timestep kinematic simulator. Scripted agents follow their AgentScript,
// the ego follows controller actions, and every tick is recorded.

#include "simloop/controller.hpp"
#include "simloop/scenario.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace simloop {

inline constexpr double kDefaultDt = 0.05;
inline constexpr double kLaneChangeDuration = 2.0;
inline constexpr double kAccelLimit = 8.0;

struct VehicleState {
  std::string name;
  /// Front-bumper position.
  double s = 0.0;
  /// Footprint centre, from the left drivable edge.
  double lat = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  int heading = 1;
  double length = kVehicleLength;
  double width = kVehicleWidth;

  int lane(double lane_width) const;
  double rear() const { return s - heading * length; }
  double center_s() const { return s - heading * length / 2.0; }
  bool operator==(const VehicleState&) const = default;
};

struct TraceFrame {
  double time = 0.0;
  /// Ego first, then agents in scenario order.
  std::vector<VehicleState> vehicles;

  const VehicleState* find(std::string_view name) const;
  const VehicleState& ego() const;
  bool operator==(const TraceFrame&) const = default;
};

enum class EventKind { kCollision, kOffRoad, kLaneChangeCompleted };

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct Event {
  EventKind kind = EventKind::kCollision;
  double time = 0.0;
  std::string subject;
  std::optional<std::string> object;
  double ego_speed_at_event = 0.0;
  /// Lane changes only: time the manoeuvre was commanded.
  std::optional<double> start_time;
  bool operator==(const Event&) const = default;
};

struct SimTrace {
  std::string scenario_id;
  double dt = kDefaultDt;
  double lane_width = kLaneWidth;
  std::vector<TraceFrame> frames;
  std::vector<Event> events;
  bool operator==(const SimTrace&) const = default;
};

/// Adds the offending test case and tick to a controller failure.
class SimulationAborted : public ControllerFailure {
 public:
  using ControllerFailure::ControllerFailure;
};

/// Runs `spec` with `controller` until `spec.duration` (or one tick after the first
/// collision). CAEM mode forces the ego acceleration to zero.
/// Throws SimulationAborted when the controller fails.
SimTrace run_simulation(const ScenarioSpec& spec, Controller& controller, double dt = kDefaultDt);

// ---------------------------------------------------------------------------
// Building blocks, exposed for testing.

struct AgentCursor {
  std::size_t phase = 0;
  double phase_start = 0.0;
  /// Lateral position when the current cut-in started.
  double cut_in_lat0 = 0.0;
  bool operator==(const AgentCursor&) const = default;
};

struct AgentStep {
  VehicleState state;
  AgentCursor cursor;
};

/// Advances a scripted agent from `time` to `time + dt`.
AgentStep step_agent(const VehicleState& state, const AgentScript& script, const AgentCursor& cursor,
                     double time, const VehicleState& ego, const RoadSpec& road, double dt);

/// Index into `script.phases` active at `time`, or phases.size() once the script is exhausted.
std::size_t active_phase(const VehicleState& state, const AgentScript& script, AgentCursor& cursor,
                         double time);

struct LaneChangePlan {
  double start_time = 0.0;
  double lat0 = 0.0;
  double target_lat = 0.0;
  double duration = kLaneChangeDuration;

  /// Cosine ramp: lat0 + d * (1 - cos(pi * t / T)) / 2, clamped at t >= T.
  double lateral_at(double elapsed) const;
  bool operator==(const LaneChangePlan&) const = default;
};

/// Plans a move to the adjacent lane centre. Lanes outside the road are allowed.
LaneChangePlan apply_lane_change(const VehicleState& ego, int command, const RoadSpec& road,
                                 double start_time);

/// Smooth lateral ramp shared by ego lane changes and agent cut-ins.
double cosine_ramp(double from, double to, double elapsed, double duration);

/// All overlapping (touching included) footprint pairs; ego pairs first.
std::vector<std::pair<std::string, std::string>> detect_collision(const TraceFrame& frame);

bool footprints_overlap(const VehicleState& a, const VehicleState& b);

/// True if any ego footprint corner lies outside [0, lane_count * lane_width].
bool outside_drivable_area(const VehicleState& v, const RoadSpec& road);

Observation make_observation(const TraceFrame& frame, const RoadSpec& road, int tick);

}  // namespace simloop
