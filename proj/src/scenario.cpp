#include "simloop/scenario.hpp"

#include "simloop/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace simloop {

std::string_view to_string(FunctionMode mode) {
  return mode == FunctionMode::kCaem ? "caem" : "acc";
}

FunctionMode parse_mode(std::string_view text) {
  if (text == "caem" || text == "CAEM") return FunctionMode::kCaem;
  if (text == "acc" || text == "ACC") return FunctionMode::kAcc;
  throw std::invalid_argument("unknown function mode: " + std::string(text));
}

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ScenarioInvalid(field, what);
}

bool valid_agent_lane(const RoadSpec& road, int lane) {
  if (lane >= 0 && lane < road.lane_count) return true;
  return lane == -1 && road.oncoming_strip.has_value();
}

void validate_agent(const ScenarioSpec& spec, const AgentScript& agent, std::size_t index) {
  const std::string path = "agents[" + std::to_string(index) + "]";
  require(!agent.name.empty(), path + ".name", "must not be empty");
  require(agent.name != kEgoName, path + ".name", "'Ego' is reserved");
  require(agent.name.find_first_of(" \t\r\n,\"") == std::string::npos, path + ".name",
          "must not contain whitespace, commas or quotes");
  require(agent.heading == 1 || agent.heading == -1, path + ".heading", "must be +1 or -1");
  require(valid_agent_lane(spec.road, agent.initial_lane), path + ".initial_lane",
          "lane index out of range");
  require(std::isfinite(agent.initial_offset), path + ".initial_offset", "must be finite");
  require(std::isfinite(agent.initial_speed) && agent.initial_speed >= 0.0,
          path + ".initial_speed", "must be >= 0");
  require(!agent.phases.empty(), path + ".phases", "at least one phase required");

  for (std::size_t p = 0; p < agent.phases.size(); ++p) {
    const std::string ppath = path + ".phases[" + std::to_string(p) + "]";
    const auto& ph = agent.phases[p];
    if (const auto* hold = std::get_if<phase::Hold>(&ph)) {
      require(hold->duration > 0.0, ppath + ".duration", "must be > 0");
    } else if (const auto* cut = std::get_if<phase::CutIn>(&ph)) {
      require(cut->duration > 0.0, ppath + ".duration", "must be > 0");
      require(valid_agent_lane(spec.road, cut->target_lane), ppath + ".target_lane",
              "lane index out of range");
    } else if (const auto* dec = std::get_if<phase::Decelerate>(&ph)) {
      require(dec->rate > 0.0, ppath + ".rate", "must be > 0");
      require(dec->floor_speed >= 0.0, ppath + ".floor_speed", "must be >= 0");
    } else if (std::holds_alternative<phase::MatchSpeed>(ph)) {
      require(agent.heading == 1, ppath, "match_speed requires a same-direction agent");
    } else if (std::holds_alternative<phase::Static>(ph)) {
      require(agent.phases.size() == 1, path + ".phases", "a static agent has exactly one phase");
      require(agent.initial_speed == 0.0, path + ".initial_speed",
              "a static agent must have zero speed");
    }
  }
}

}  // namespace

void validate(const ScenarioSpec& spec) {
  require(!spec.id.empty(), "id", "must not be empty");
  require(spec.id.find_first_of(" \t\r\n/\\") == std::string::npos, "id",
          "must not contain whitespace or path separators");
  require(!spec.description.empty(), "description", "must not be empty");
  require(spec.road.lane_count >= 1, "road.lane_count", "must be >= 1");
  require(spec.road.lane_width > 0.0, "road.lane_width", "must be > 0");
  require(spec.road.length > 0.0, "road.length", "must be > 0");
  if (spec.road.oncoming_strip) {
    const auto& strip = *spec.road.oncoming_strip;
    require(strip.lat_min < strip.lat_max, "road.oncoming_strip", "lat_min must be < lat_max");
    require(strip.lat_max <= 0.0, "road.oncoming_strip",
            "must lie left of the drivable area (lat_max <= 0)");
  }
  require(spec.ego_lane >= 0 && spec.ego_lane < spec.road.lane_count, "ego_lane",
          "lane index out of range");
  require(std::isfinite(spec.ego_speed) && spec.ego_speed >= 0.0, "ego_speed", "must be >= 0");
  require(std::isfinite(spec.ego_start), "ego_start", "must be finite");
  if (spec.set_speed) require(*spec.set_speed > 0.0, "set_speed", "must be > 0");
  require(spec.duration > 0.0, "duration", "must be > 0");
  require(!(spec.expected_outcome.lane_change_required &&
            spec.expected_outcome.lane_change_forbidden),
          "expected_outcome", "lane change cannot be both required and forbidden");
  if (spec.expected_outcome.time_gap_range) {
    const auto [lo, hi] = *spec.expected_outcome.time_gap_range;
    require(lo >= 0.0 && lo < hi, "expected_outcome.time_gap", "requires 0 <= min < max");
  }
  if (spec.expected_outcome.reach_set_speed) {
    require(spec.set_speed.has_value(), "expected_outcome.reach_set_speed",
            "requires set_speed");
  }

  std::set<std::string> names;
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    validate_agent(spec, spec.agents[i], i);
    require(names.insert(spec.agents[i].name).second, "agents[" + std::to_string(i) + "].name",
            "duplicate agent name");
  }
}

double solve_initial_offset(double ego_speed, double overtaker_speed, double cutin_end_time,
                            double target_headway, double vehicle_length) {
  if (!(ego_speed > 0.0) || overtaker_speed < ego_speed) {
    throw std::invalid_argument("solve_initial_offset requires overtaker_speed >= ego_speed > 0");
  }
  if (!(cutin_end_time > 0.0)) {
    throw std::invalid_argument("solve_initial_offset requires cutin_end_time > 0");
  }
  const double offset =
      target_headway * ego_speed - (overtaker_speed - ego_speed) * cutin_end_time;
  if (offset < -vehicle_length) {
    throw ScenarioInfeasible("Over-Taker would have to start behind the ego (offset " +
                             format_fixed(offset, 2) + " m)");
  }
  return offset;
}

namespace {

using namespace catalog;

AgentScript make_overtaker(double ego_speed) {
  const double speed = ego_speed * kOvertakerSpeedFactor;
  AgentScript a;
  a.name = "OverTaker";
  a.initial_lane = 0;
  a.initial_speed = speed;
  a.initial_offset = solve_initial_offset(ego_speed, speed, kCutInEnd, kTargetHeadway,
                                          kVehicleLength);
  a.heading = 1;
  a.phases = {phase::Hold{kCutInStart}, phase::CutIn{1, kCutInDuration},
              phase::Decelerate{kOvertakerDecel, 0.0}};
  return a;
}

ScenarioSpec base_cut_in(std::string id, double ego_kph) {
  ScenarioSpec s;
  s.id = std::move(id);
  s.road = RoadSpec{3, kLaneWidth, 1000.0, std::nullopt};
  s.ego_lane = 1;
  s.ego_speed = kph(ego_kph);
  s.duration = kDuration;
  s.mode = FunctionMode::kCaem;
  s.expected_outcome.lane_change_required = true;
  s.agents.push_back(make_overtaker(s.ego_speed));
  return s;
}

std::string cut_in_text(double ego_kph) {
  const double v = kph(ego_kph);
  return "The ego vehicle drives at a constant " + format_fixed(ego_kph, 0) + " kph (" +
         format_fixed(v, 2) +
         " m/s) in the second lane from the left of a three-lane highway. The OverTaker "
         "starts in the leftmost lane, 5% faster than the ego. Between 4.0 s and 6.0 s it "
         "cuts in ahead of the ego and then immediately decelerates at 6 m/s^2 until it "
         "stands still. When the deceleration starts, the headway time between the OverTaker "
         "and the ego is only 0.4 seconds.";
}

ScenarioSpec make_tc1_to_3(std::string id, double ego_kph) {
  auto s = base_cut_in(std::move(id), ego_kph);
  s.description = "Cut-in and decelerate at " + format_fixed(ego_kph, 0) + " kph. " +
                  cut_in_text(ego_kph);
  return s;
}

ScenarioSpec make_tc4() {
  auto s = base_cut_in("TC4", 108.0);
  AgentScript blocker;
  blocker.name = "Blocker";
  blocker.initial_lane = 0;
  blocker.initial_speed = 0.0;
  // Static, so the 40 m gap at deceleration onset fixes the gap at t = 0.
  blocker.initial_offset = kBlockerGapAtDecelOnset + s.ego_speed * kCutInEnd;
  blocker.phases = {phase::Static{}};
  s.agents.push_back(blocker);
  s.description = "Cut-in and decelerate with a static blocker at 108 kph. " +
                  cut_in_text(108.0) +
                  " A stationary Blocker vehicle stands further ahead in the leftmost lane, 40 m "
                  "ahead of the ego when the OverTaker starts braking, so an evasive lane change "
                  "to the left runs into it.";
  return s;
}

ScenarioSpec make_tc5() {
  auto s = base_cut_in("TC5", 108.0);
  constexpr double kExtraSpeed = 3.0;
  constexpr double kAlongsideAt = 5.0;
  AgentScript blocker;
  blocker.name = "Blocker";
  blocker.initial_lane = 0;
  blocker.initial_speed = s.ego_speed + kExtraSpeed;
  // Front bumpers line up at kAlongsideAt, when the blocker starts matching the ego speed.
  blocker.initial_offset = -kExtraSpeed * kAlongsideAt - kVehicleLength;
  blocker.phases = {phase::Hold{kAlongsideAt}, phase::MatchSpeed{}};
  s.agents.push_back(blocker);
  s.description = "Cut-in and decelerate with a moving blocker at 108 kph. " +
                  cut_in_text(108.0) +
                  " A Blocker vehicle approaches from behind in the leftmost lane, 3 m/s faster "
                  "than the ego. When it reaches the left side of the ego at 5.0 s it adjusts its "
                  "speed to match the ego, blocking the left lane.";
  return s;
}

ScenarioSpec make_tc6() {
  ScenarioSpec s;
  s.id = "TC6";
  s.road = RoadSpec{3, kLaneWidth, 1000.0, std::nullopt};
  s.ego_lane = 1;
  s.ego_speed = kph(120.0);
  s.duration = kDuration;
  s.expected_outcome.lane_change_forbidden = true;
  s.description =
      "Unintended lane change on an empty road. The ego vehicle drives at a constant 120 kph "
      "(33.33 m/s) in the second lane from the left of a three-lane highway. There is no other "
      "vehicle on the road, so any lane change is unintended.";
  return s;
}

ScenarioSpec make_tc7() {
  ScenarioSpec s;
  s.id = "TC7";
  s.road = RoadSpec{2, kLaneWidth, 1000.0, OncomingStrip{-kLaneWidth, 0.0}};
  s.ego_lane = 0;
  s.ego_speed = kph(100.0);
  s.duration = kDuration;
  s.expected_outcome.lane_change_forbidden = true;
  AgentScript oncoming;
  oncoming.name = "Oncoming";
  oncoming.initial_lane = -1;
  oncoming.heading = -1;
  oncoming.initial_speed = kph(90.0);
  oncoming.initial_offset = 300.0;
  oncoming.phases = {phase::Hold{kDuration}};
  s.agents.push_back(oncoming);
  s.description =
      "Unintended lane change with oncoming traffic. The ego vehicle drives at a constant "
      "100 kph (27.78 m/s) in the leftmost lane of a two-lane carriageway. Another vehicle "
      "passes at 90 kph in the opposite direction, outside the drivable area to the left of the "
      "ego. There is no imminent collision, so any lane change is unintended.";
  return s;
}

ScenarioSpec make_acc_base(std::string id) {
  ScenarioSpec s;
  s.id = std::move(id);
  s.road = RoadSpec{3, kLaneWidth, 2000.0, std::nullopt};
  s.ego_lane = 1;
  s.duration = 30.0;
  s.mode = FunctionMode::kAcc;
  return s;
}

ScenarioSpec make_acc1() {
  auto s = make_acc_base("ACC1");
  s.ego_speed = 30.0;
  s.set_speed = 30.0;
  AgentScript lead;
  lead.name = "Lead";
  lead.initial_lane = 1;
  lead.initial_offset = 80.0;
  lead.initial_speed = 22.0;
  lead.phases = {phase::Hold{s.duration}};
  s.agents.push_back(lead);
  s.expected_outcome.time_gap_range = std::pair{1.0, 3.0};
  s.description =
      "Slower lead vehicle. The ego vehicle drives at its set speed of 30 m/s in the middle "
      "lane. A Lead vehicle 80 m ahead in the same lane drives at a constant 22 m/s. The ego "
      "must not collide and must settle to a time gap between 1.0 and 3.0 seconds.";
  return s;
}

ScenarioSpec make_acc2() {
  auto s = make_acc_base("ACC2");
  s.ego_speed = 25.0;
  s.set_speed = 25.0;
  AgentScript lead;
  lead.name = "Lead";
  lead.initial_lane = 1;
  lead.initial_offset = 50.0;
  lead.initial_speed = 25.0;
  lead.phases = {phase::Hold{5.0}, phase::Decelerate{3.0, 0.0}};
  s.agents.push_back(lead);
  s.description =
      "Braking lead vehicle. The ego vehicle drives at its set speed of 25 m/s in the middle "
      "lane, 50 m behind a Lead vehicle at the same speed. After 5.0 s the Lead vehicle brakes "
      "at 3 m/s^2 to a standstill. The ego must not collide.";
  return s;
}

ScenarioSpec make_acc3() {
  auto s = make_acc_base("ACC3");
  s.ego_speed = 25.0;
  s.set_speed = 30.0;
  s.expected_outcome.lane_change_forbidden = true;
  s.expected_outcome.reach_set_speed = true;
  s.description =
      "Free road. The ego vehicle starts at 25 m/s in the middle lane of an empty road with a "
      "set speed of 30 m/s. It must reach the set speed within 0.5 m/s and must not change "
      "lanes.";
  return s;
}

}  // namespace

ScenarioSpec build_test_case(std::string_view tc_id) {
  ScenarioSpec spec;
  if (tc_id == "TC1") spec = make_tc1_to_3("TC1", 120.0);
  else if (tc_id == "TC2") spec = make_tc1_to_3("TC2", 80.0);
  else if (tc_id == "TC3") spec = make_tc1_to_3("TC3", 40.0);
  else if (tc_id == "TC4") spec = make_tc4();
  else if (tc_id == "TC5") spec = make_tc5();
  else if (tc_id == "TC6") spec = make_tc6();
  else if (tc_id == "TC7") spec = make_tc7();
  else if (tc_id == "ACC1") spec = make_acc1();
  else if (tc_id == "ACC2") spec = make_acc2();
  else if (tc_id == "ACC3") spec = make_acc3();
  else throw UnknownScenario(std::string(tc_id));
  validate(spec);
  return spec;
}

std::vector<std::string> catalog_ids(FunctionMode mode) {
  if (mode == FunctionMode::kAcc) return {"ACC1", "ACC2", "ACC3"};
  return {"TC1", "TC2", "TC3", "TC4", "TC5", "TC6", "TC7"};
}

std::vector<std::string> all_catalog_ids() {
  auto ids = catalog_ids(FunctionMode::kCaem);
  auto acc = catalog_ids(FunctionMode::kAcc);
  ids.insert(ids.end(), acc.begin(), acc.end());
  return ids;
}

}  // namespace simloop
