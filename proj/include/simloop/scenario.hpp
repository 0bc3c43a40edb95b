#pragma once

// Road, agent and scenario data model plus the built-in test-case catalog.
//
// Coordinates: `s` runs along the road in the direction of travel of the ego.
// Lateral positions are measured from the left drivable edge and grow to the
// right, so lane 0 is the leftmost lane and lane i has its centre at
// (i + 0.5) * lane_width.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace simloop {

inline constexpr double kVehicleLength = 5.0;
inline constexpr double kVehicleWidth = 2.0;
inline constexpr double kLaneWidth = 3.5;
inline constexpr const char* kEgoName = "Ego";

enum class FunctionMode { kCaem, kAcc };

std::string_view to_string(FunctionMode mode);
FunctionMode parse_mode(std::string_view text);

/// Band reserved for opposite-direction traffic, left of lane 0.
struct OncomingStrip {
  double lat_min = 0.0;
  double lat_max = 0.0;
  bool operator==(const OncomingStrip&) const = default;
};

struct RoadSpec {
  int lane_count = 3;
  double lane_width = kLaneWidth;
  double length = 1000.0;
  std::optional<OncomingStrip> oncoming_strip;

  double drivable_width() const { return lane_count * lane_width; }
  double lane_center(int lane) const { return (lane + 0.5) * lane_width; }
  bool operator==(const RoadSpec&) const = default;
};

namespace phase {
struct Hold {
  double duration = 0.0;
  bool operator==(const Hold&) const = default;
};
struct CutIn {
  int target_lane = 0;
  double duration = 0.0;
  bool operator==(const CutIn&) const = default;
};
/// Decelerates at `rate` until `floor_speed`, then hands over to the next phase.
struct Decelerate {
  double rate = 0.0;
  double floor_speed = 0.0;
  bool operator==(const Decelerate&) const = default;
};
/// Tracks the ego speed from the phase start until the end of the run.
struct MatchSpeed {
  bool operator==(const MatchSpeed&) const = default;
};
struct Static {
  bool operator==(const Static&) const = default;
};
}  // namespace phase

using Phase = std::variant<phase::Hold, phase::CutIn, phase::Decelerate, phase::MatchSpeed,
                           phase::Static>;

struct AgentScript {
  std::string name;
  int initial_lane = 0;
  /// Gap from the ego front bumper to this agent's rear bumper at t = 0.
  /// Negative values place the agent (partly) behind the ego front.
  double initial_offset = 0.0;
  double initial_speed = 0.0;
  int heading = 1;
  std::vector<Phase> phases;

  bool operator==(const AgentScript&) const = default;
};

struct ExpectedOutcome {
  bool lane_change_required = false;
  bool lane_change_forbidden = false;
  /// ACC: time gap to the lead over the settling window must stay inside this range.
  std::optional<std::pair<double, double>> time_gap_range;
  /// ACC: final ego speed must be within +-0.5 m/s of the set speed.
  bool reach_set_speed = false;

  bool operator==(const ExpectedOutcome&) const = default;
};

struct ScenarioSpec {
  std::string id;
  std::string description;
  RoadSpec road;
  int ego_lane = 0;
  double ego_speed = 0.0;
  /// Ego front bumper position at t = 0.
  double ego_start = 100.0;
  std::optional<double> set_speed;
  std::vector<AgentScript> agents;
  double duration = 20.0;
  FunctionMode mode = FunctionMode::kCaem;
  ExpectedOutcome expected_outcome;

  bool operator==(const ScenarioSpec&) const = default;
};

class UnknownScenario : public std::runtime_error {
 public:
  explicit UnknownScenario(const std::string& id)
      : std::runtime_error("unknown scenario: " + id) {}
};

class ScenarioInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Semantic violation of a ScenarioSpec invariant; `field()` names the offending field.
class ScenarioInvalid : public std::runtime_error {
 public:
  ScenarioInvalid(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Throws ScenarioInvalid on the first violated invariant.
void validate(const ScenarioSpec& spec);

/// Initial gap (ego front bumper to Over-Taker rear bumper) such that, with both
/// vehicles holding their speed, the gap at `cutin_end_time` equals
/// `target_headway * ego_speed`.
double solve_initial_offset(double ego_speed, double overtaker_speed, double cutin_end_time,
                            double target_headway, double vehicle_length);

/// Catalog scenario TC1..TC7 or ACC1..ACC3. Pure: equal ids give equal specs.
ScenarioSpec build_test_case(std::string_view tc_id);

std::vector<std::string> catalog_ids(FunctionMode mode);
std::vector<std::string> all_catalog_ids();

// Catalog construction constants.
namespace catalog {
inline constexpr double kCutInStart = 4.0;
inline constexpr double kCutInDuration = 2.0;
inline constexpr double kCutInEnd = kCutInStart + kCutInDuration;
inline constexpr double kTargetHeadway = 0.4;
inline constexpr double kOvertakerSpeedFactor = 1.05;
inline constexpr double kOvertakerDecel = 6.0;
inline constexpr double kDuration = 20.0;
inline constexpr double kBlockerGapAtDecelOnset = 40.0;
}  // namespace catalog

inline double kph(double v) { return v / 3.6; }

}  // namespace simloop
