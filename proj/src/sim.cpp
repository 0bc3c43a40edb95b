#include "simloop/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace simloop {

namespace {
constexpr double kTimeEps = 1e-9;
}

int VehicleState::lane(double lane_width) const {
  return static_cast<int>(std::floor(lat / lane_width));
}

const VehicleState* TraceFrame::find(std::string_view name) const {
  for (const auto& v : vehicles) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

const VehicleState& TraceFrame::ego() const {
  const auto* ego = find(kEgoName);
  if (ego == nullptr) throw std::logic_error("frame without ego vehicle");
  return *ego;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kCollision: return "Collision";
    case EventKind::kOffRoad: return "OffRoad";
    case EventKind::kLaneChangeCompleted: return "LaneChangeCompleted";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view text) {
  if (text == "Collision") return EventKind::kCollision;
  if (text == "OffRoad") return EventKind::kOffRoad;
  if (text == "LaneChangeCompleted") return EventKind::kLaneChangeCompleted;
  throw std::invalid_argument("unknown event kind: " + std::string(text));
}

double cosine_ramp(double from, double to, double elapsed, double duration) {
  if (elapsed >= duration - kTimeEps) return to;
  if (elapsed <= 0.0) return from;
  const double frac = (1.0 - std::cos(std::numbers::pi * elapsed / duration)) / 2.0;
  return from + (to - from) * frac;
}

double LaneChangePlan::lateral_at(double elapsed) const {
  return cosine_ramp(lat0, target_lat, elapsed, duration);
}

LaneChangePlan apply_lane_change(const VehicleState& ego, int command, const RoadSpec& road,
                                 double start_time) {
  LaneChangePlan plan;
  plan.start_time = start_time;
  plan.lat0 = ego.lat;
  plan.target_lat = road.lane_center(ego.lane(road.lane_width) + command);
  plan.duration = kLaneChangeDuration;
  return plan;
}

std::size_t active_phase(const VehicleState& state, const AgentScript& script, AgentCursor& cursor,
                         double time) {
  while (cursor.phase < script.phases.size()) {
    const auto& ph = script.phases[cursor.phase];
    double finished_at = 0.0;
    bool finished = false;
    if (const auto* hold = std::get_if<phase::Hold>(&ph)) {
      finished_at = cursor.phase_start + hold->duration;
      finished = time >= finished_at - kTimeEps;
    } else if (const auto* cut = std::get_if<phase::CutIn>(&ph)) {
      finished_at = cursor.phase_start + cut->duration;
      finished = time >= finished_at - kTimeEps;
    } else if (const auto* dec = std::get_if<phase::Decelerate>(&ph)) {
      finished_at = time;
      finished = state.speed <= dec->floor_speed;
    }
    if (!finished) break;
    ++cursor.phase;
    cursor.phase_start = finished_at;
    if (cursor.phase < script.phases.size() &&
        std::holds_alternative<phase::CutIn>(script.phases[cursor.phase])) {
      cursor.cut_in_lat0 = state.lat;
    }
  }
  return cursor.phase;
}

AgentStep step_agent(const VehicleState& state, const AgentScript& script, const AgentCursor& cursor,
                     double time, const VehicleState& ego, const RoadSpec& road, double dt) {
  AgentStep out{state, cursor};
  auto& next = out.state;
  const std::size_t idx = active_phase(state, script, out.cursor, time);

  double new_speed = state.speed;
  if (idx < script.phases.size()) {
    const auto& ph = script.phases[idx];
    if (const auto* cut = std::get_if<phase::CutIn>(&ph)) {
      next.lat = cosine_ramp(out.cursor.cut_in_lat0, road.lane_center(cut->target_lane),
                             time + dt - out.cursor.phase_start, cut->duration);
    } else if (const auto* dec = std::get_if<phase::Decelerate>(&ph)) {
      new_speed = std::max(dec->floor_speed, state.speed - dec->rate * dt);
    } else if (std::holds_alternative<phase::MatchSpeed>(ph)) {
      new_speed = ego.speed;
    } else if (std::holds_alternative<phase::Static>(ph)) {
      new_speed = 0.0;
    }
  }
  next.s = state.s + state.heading * state.speed * dt;
  next.speed = new_speed;
  next.accel = (new_speed - state.speed) / dt;
  return out;
}

bool footprints_overlap(const VehicleState& a, const VehicleState& b) {
  const double ds = std::abs(a.center_s() - b.center_s());
  const double dl = std::abs(a.lat - b.lat);
  return ds <= (a.length + b.length) / 2.0 && dl <= (a.width + b.width) / 2.0;
}

std::vector<std::pair<std::string, std::string>> detect_collision(const TraceFrame& frame) {
  std::vector<std::pair<std::string, std::string>> ego_pairs;
  std::vector<std::pair<std::string, std::string>> other_pairs;
  const auto& vs = frame.vehicles;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      if (!footprints_overlap(vs[i], vs[j])) continue;
      if (vs[i].name == kEgoName) ego_pairs.emplace_back(vs[i].name, vs[j].name);
      else if (vs[j].name == kEgoName) ego_pairs.emplace_back(vs[j].name, vs[i].name);
      else other_pairs.emplace_back(vs[i].name, vs[j].name);
    }
  }
  ego_pairs.insert(ego_pairs.end(), other_pairs.begin(), other_pairs.end());
  return ego_pairs;
}

bool outside_drivable_area(const VehicleState& v, const RoadSpec& road) {
  return v.lat - v.width / 2.0 < 0.0 || v.lat + v.width / 2.0 > road.drivable_width();
}

Observation make_observation(const TraceFrame& frame, const RoadSpec& road, int tick) {
  const auto& ego = frame.ego();
  Observation obs;
  obs.tick = tick;
  obs.time = frame.time;
  obs.ego = EgoObservation{ego.s,     ego.lat, ego.speed, ego.lane(road.lane_width), road.lane_count,
                           road.lane_width};
  for (const auto& v : frame.vehicles) {
    if (v.name == kEgoName) continue;
    obs.agents.push_back(
        AgentObservation{v.name, v.s - ego.s, v.lat, v.lane(road.lane_width), v.speed, v.heading});
  }
  std::stable_sort(obs.agents.begin(), obs.agents.end(), [](const auto& a, const auto& b) {
    const double da = std::abs(a.s_relative);
    const double db = std::abs(b.s_relative);
    if (da != db) return da < db;
    return a.name < b.name;
  });
  return obs;
}

InitMessage make_init(const ScenarioSpec& spec, double dt) {
  InitMessage init;
  init.scenario_id = spec.id;
  init.mode = spec.mode;
  init.dt = dt;
  init.lane_count = spec.road.lane_count;
  init.lane_width = spec.road.lane_width;
  init.ego_length = kVehicleLength;
  init.ego_width = kVehicleWidth;
  init.set_speed = spec.set_speed;
  return init;
}

namespace {

VehicleState initial_agent_state(const AgentScript& a, const ScenarioSpec& spec) {
  VehicleState v;
  v.name = a.name;
  v.heading = a.heading;
  const double rear = spec.ego_start + a.initial_offset;
  v.s = rear + a.heading * v.length;
  v.lat = spec.road.lane_center(a.initial_lane);
  v.speed = a.initial_speed;
  return v;
}

class Recorder {
 public:
  Recorder(const ScenarioSpec& spec, SimTrace& trace) : spec_(spec), trace_(trace) {}

  // Records collisions and off-road transitions for a freshly appended frame.
  // Returns true if a new collision appeared.
  bool scan(const TraceFrame& frame) {
    const auto& ego = frame.ego();
    const bool off = outside_drivable_area(ego, spec_.road);
    if (off && !was_off_road_) {
      trace_.events.push_back(Event{EventKind::kOffRoad, frame.time, kEgoName, std::nullopt,
                                    ego.speed, std::nullopt});
    }
    was_off_road_ = off;

    bool collided = false;
    for (auto& [a, b] : detect_collision(frame)) {
      if (!reported_.insert({a, b}).second) continue;
      trace_.events.push_back(Event{EventKind::kCollision, frame.time, a, b, ego.speed, std::nullopt});
      collided = true;
    }
    return collided;
  }

 private:
  const ScenarioSpec& spec_;
  SimTrace& trace_;
  bool was_off_road_ = false;
  std::set<std::pair<std::string, std::string>> reported_;
};

}  // namespace

SimTrace run_simulation(const ScenarioSpec& spec, Controller& controller, double dt) {
  if (!(dt > 0.0 && dt <= 0.2)) throw std::invalid_argument("dt must be in (0, 0.2]");

  SimTrace trace;
  trace.scenario_id = spec.id;
  trace.dt = dt;
  trace.lane_width = spec.road.lane_width;

  const auto ticks = static_cast<int>(std::ceil(spec.duration / dt - kTimeEps));
  trace.frames.reserve(static_cast<std::size_t>(ticks) + 1);

  TraceFrame frame;
  frame.time = 0.0;
  VehicleState ego;
  ego.name = kEgoName;
  ego.s = spec.ego_start;
  ego.lat = spec.road.lane_center(spec.ego_lane);
  ego.speed = spec.ego_speed;
  frame.vehicles.push_back(ego);
  std::vector<AgentCursor> cursors(spec.agents.size());
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    frame.vehicles.push_back(initial_agent_state(spec.agents[i], spec));
    cursors[i].cut_in_lat0 = frame.vehicles.back().lat;
  }

  Recorder recorder(spec, trace);
  trace.frames.push_back(frame);
  std::optional<int> halt_at;
  if (recorder.scan(frame)) halt_at = 1;

  LaneChangePlan plan;
  bool changing = false;
  for (int k = 0; k < ticks && !(halt_at && k >= *halt_at); ++k) {
    const TraceFrame& cur = trace.frames.back();
    const double t = k * dt;

    ControlAction action;
    try {
      action = controller.tick(make_observation(cur, spec.road, k));
    } catch (ControllerFailure& failure) {
      ExecutabilityStatus status = failure.status();
      status.tc_id = spec.id;
      if (!status.tick) status.tick = k;
      throw SimulationAborted(std::move(status));
    }

    const VehicleState& ego_now = cur.vehicles.front();
    double accel = std::clamp(action.accel, -kAccelLimit, kAccelLimit);
    if (spec.mode == FunctionMode::kCaem) accel = 0.0;

    TraceFrame next;
    next.time = (k + 1) * dt;
    next.vehicles.reserve(cur.vehicles.size());

    VehicleState ego_next = ego_now;
    const double new_speed = std::max(0.0, ego_now.speed + accel * dt);
    ego_next.s = ego_now.s + ego_now.speed * dt;
    ego_next.speed = new_speed;
    ego_next.accel = (new_speed - ego_now.speed) / dt;

    if (!changing && action.lane_change != 0) {
      plan = apply_lane_change(ego_now, action.lane_change, spec.road, t);
      changing = true;
    }
    std::optional<Event> completed;
    if (changing) {
      const double elapsed = next.time - plan.start_time;
      ego_next.lat = plan.lateral_at(elapsed);
      if (elapsed >= plan.duration - kTimeEps) {
        completed = Event{EventKind::kLaneChangeCompleted, next.time, kEgoName, std::nullopt,
                          ego_next.speed, plan.start_time};
        changing = false;
      }
    }
    next.vehicles.push_back(ego_next);

    for (std::size_t i = 0; i < spec.agents.size(); ++i) {
      auto step = step_agent(cur.vehicles[i + 1], spec.agents[i], cursors[i], t, ego_now,
                             spec.road, dt);
      cursors[i] = step.cursor;
      next.vehicles.push_back(std::move(step.state));
    }

    trace.frames.push_back(std::move(next));
    if (completed) trace.events.push_back(*completed);
    if (recorder.scan(trace.frames.back()) && !halt_at) halt_at = k + 2;
  }
  return trace;
}

}  // namespace simloop
