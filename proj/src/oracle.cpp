#include "simloop/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace simloop {

namespace {

constexpr double kTimeEps = 1e-9;

constexpr std::pair<Requirement, std::string_view> kRequirementNames[] = {
    {Requirement::kSR1, "SR1"},
    {Requirement::kSR2, "SR2"},
    {Requirement::kSR3, "SR3"},
    {Requirement::kForbiddenLaneChange, "ForbiddenLaneChange"},
    {Requirement::kTimeGapOutOfRange, "TimeGapOutOfRange"},
    {Requirement::kSetSpeedNotReached, "SetSpeedNotReached"},
    {Requirement::kExpectedManoeuvreMissing, "ExpectedManoeuvreMissing"},
};

void keep_min(std::optional<double>& slot, std::optional<double> v) {
  if (v && (!slot || *v < *slot)) slot = v;
}

bool is_ego(const std::string& name) { return name == kEgoName; }

}  // namespace

std::string_view to_string(Requirement r) {
  for (const auto& [req, name] : kRequirementNames) {
    if (req == r) return name;
  }
  return "?";
}

Requirement parse_requirement(std::string_view text) {
  for (const auto& [req, name] : kRequirementNames) {
    if (name == text) return req;
  }
  throw std::invalid_argument("unknown requirement: " + std::string(text));
}

const VehicleState* find_lead(const TraceFrame& frame, double lane_width) {
  const auto& ego = frame.ego();
  const int lane = ego.lane(lane_width);
  const VehicleState* best = nullptr;
  for (const auto& v : frame.vehicles) {
    if (is_ego(v.name) || v.heading != ego.heading || v.lane(lane_width) != lane) continue;
    if (v.s <= ego.s) continue;
    if (best == nullptr || v.s < best->s) best = &v;
  }
  return best;
}

std::optional<double> compute_headway(const TraceFrame& frame, double lane_width) {
  const auto* lead = find_lead(frame, lane_width);
  if (lead == nullptr) return std::nullopt;
  const auto& ego = frame.ego();
  const double gap = (lead->rear() - ego.s) * ego.heading;
  if (gap <= 0.0 || ego.speed <= 0.0) return std::nullopt;
  return gap / ego.speed;
}

std::optional<double> compute_ttc(const TraceFrame& frame, double lane_width) {
  const auto* lead = find_lead(frame, lane_width);
  if (lead == nullptr) return std::nullopt;
  const auto& ego = frame.ego();
  const double gap = (lead->rear() - ego.s) * ego.heading;
  const double closing = ego.speed - lead->speed;
  if (gap <= 0.0 || closing <= 0.0) return std::nullopt;
  return gap / closing;
}

std::vector<Event> detect_unintended_lane_change(const SimTrace& trace, const ScenarioSpec& spec,
                                                 const OracleConfig& cfg) {
  std::vector<Event> out;
  const double w = spec.road.lane_width;
  for (const auto& e : trace.events) {
    if (e.kind != EventKind::kLaneChangeCompleted || !is_ego(e.subject)) continue;
    const double start = e.start_time.value_or(e.time - kLaneChangeDuration);
    bool intended = false;
    for (const auto& f : trace.frames) {
      if (f.time < start - cfg.intent_window - kTimeEps) continue;
      if (f.time > start + kTimeEps) break;
      const auto ttc = compute_ttc(f, w);
      const auto hw = compute_headway(f, w);
      if ((ttc && *ttc < cfg.imminent_ttc) || (hw && *hw < cfg.imminent_headway)) {
        intended = true;
        break;
      }
    }
    if (!intended) out.push_back(e);
  }
  return out;
}

TestCaseResult evaluate(const SimTrace& trace, const ScenarioSpec& spec, const OracleConfig& cfg) {
  if (trace.scenario_id != spec.id) {
    throw EvaluationError("trace of " + trace.scenario_id + " evaluated against " + spec.id);
  }
  if (trace.frames.empty()) throw EvaluationError("trace has no frames");
  if (std::abs(trace.lane_width - spec.road.lane_width) > 1e-12) {
    throw EvaluationError("trace lane width differs from scenario");
  }
  const std::size_t vehicle_count = spec.agents.size() + 1;
  for (const auto& f : trace.frames) {
    if (f.vehicles.size() != vehicle_count || f.find(kEgoName) == nullptr) {
      throw EvaluationError("frame at t=" + std::to_string(f.time) + " does not match the scenario");
    }
  }

  TestCaseResult r;
  r.tc_id = spec.id;
  const double w = spec.road.lane_width;

  for (const auto& f : trace.frames) {
    keep_min(r.metrics.min_ttc, compute_ttc(f, w));
    keep_min(r.metrics.min_headway, compute_headway(f, w));
  }

  bool collided = false;
  bool lane_changed = false;
  for (const auto& e : trace.events) {
    switch (e.kind) {
      case EventKind::kCollision:
        if (is_ego(e.subject) || (e.object && is_ego(*e.object))) {
          r.violations.push_back({Requirement::kSR1, e, std::nullopt});
          collided = true;
        }
        break;
      case EventKind::kOffRoad:
        if (is_ego(e.subject)) r.violations.push_back({Requirement::kSR2, e, std::nullopt});
        break;
      case EventKind::kLaneChangeCompleted:
        if (is_ego(e.subject)) {
          r.metrics.lane_change_times.push_back(e.time);
          lane_changed = true;
        }
        break;
    }
  }

  const auto unintended = detect_unintended_lane_change(trace, spec, cfg);
  for (const auto& e : unintended) r.violations.push_back({Requirement::kSR3, e, std::nullopt});

  const auto& expect = spec.expected_outcome;
  if (expect.lane_change_forbidden) {
    for (const auto& e : trace.events) {
      if (e.kind != EventKind::kLaneChangeCompleted || !is_ego(e.subject)) continue;
      if (std::find(unintended.begin(), unintended.end(), e) != unintended.end()) continue;
      r.violations.push_back({Requirement::kForbiddenLaneChange, e, std::nullopt});
    }
  }

  if (!collided && expect.time_gap_range) {
    const auto [lo, hi] = *expect.time_gap_range;
    const double t_end = trace.frames.back().time;
    std::optional<double> worst;
    bool missing = false;
    for (const auto& f : trace.frames) {
      if (f.time < t_end - cfg.settle_window - kTimeEps) continue;
      const auto hw = compute_headway(f, w);
      if (!hw) {
        missing = true;
        continue;
      }
      const double badness = std::max(lo - *hw, *hw - hi);
      if (!worst || badness > std::max(lo - *worst, *worst - hi)) worst = hw;
    }
    if (missing || !worst || *worst < lo || *worst > hi) {
      r.violations.push_back({Requirement::kTimeGapOutOfRange, std::nullopt, missing ? std::nullopt : worst});
    }
  }

  if (!collided && expect.reach_set_speed && spec.set_speed) {
    const double v = trace.frames.back().ego().speed;
    if (std::abs(v - *spec.set_speed) > cfg.set_speed_tolerance) {
      r.violations.push_back({Requirement::kSetSpeedNotReached, std::nullopt, v});
    }
  }

  if (expect.lane_change_required && !lane_changed && !collided) {
    r.advisories.push_back({Requirement::kExpectedManoeuvreMissing, std::nullopt, std::nullopt});
  }

  std::stable_sort(r.violations.begin(), r.violations.end(), [](const Violation& a, const Violation& b) {
    const double ta = a.event ? a.event->time : INFINITY;
    const double tb = b.event ? b.event->time : INFINITY;
    return ta < tb;
  });
  r.passed = r.violations.empty();
  return r;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

nlohmann::json to_json(const Event& e) {
  nlohmann::json j = {{"kind", std::string(to_string(e.kind))},
                      {"time", e.time},
                      {"subject", e.subject},
                      {"ego_speed", e.ego_speed_at_event}};
  if (e.object) j["object"] = *e.object;
  if (e.start_time) j["start_time"] = *e.start_time;
  return j;
}

Event event_from_json(const nlohmann::json& j) {
  Event e;
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.time = j.at("time").get<double>();
  e.subject = j.at("subject").get<std::string>();
  e.ego_speed_at_event = j.at("ego_speed").get<double>();
  if (j.contains("object")) e.object = j.at("object").get<std::string>();
  e.start_time = opt_double(j, "start_time");
  return e;
}

nlohmann::json to_json(const Violation& v) {
  nlohmann::json j = {{"requirement", std::string(to_string(v.requirement))}};
  j["event"] = v.event ? to_json(*v.event) : nlohmann::json();
  j["measured"] = opt(v.measured);
  return j;
}

Violation violation_from_json(const nlohmann::json& j) {
  Violation v;
  v.requirement = parse_requirement(j.at("requirement").get<std::string>());
  if (j.contains("event") && !j.at("event").is_null()) v.event = event_from_json(j.at("event"));
  v.measured = opt_double(j, "measured");
  return v;
}

nlohmann::json to_json(const TestCaseResult& r) {
  nlohmann::json viol = nlohmann::json::array();
  for (const auto& v : r.violations) viol.push_back(to_json(v));
  nlohmann::json adv = nlohmann::json::array();
  for (const auto& v : r.advisories) adv.push_back(to_json(v));
  return {{"tc_id", r.tc_id},
          {"passed", r.passed},
          {"violations", viol},
          {"advisories", adv},
          {"metrics",
           {{"min_ttc", opt(r.metrics.min_ttc)},
            {"min_headway", opt(r.metrics.min_headway)},
            {"lane_change_times", r.metrics.lane_change_times}}}};
}

TestCaseResult result_from_json(const nlohmann::json& j) {
  TestCaseResult r;
  r.tc_id = j.at("tc_id").get<std::string>();
  r.passed = j.at("passed").get<bool>();
  for (const auto& v : j.at("violations")) r.violations.push_back(violation_from_json(v));
  if (j.contains("advisories")) {
    for (const auto& v : j.at("advisories")) r.advisories.push_back(violation_from_json(v));
  }
  const auto& m = j.at("metrics");
  r.metrics.min_ttc = opt_double(m, "min_ttc");
  r.metrics.min_headway = opt_double(m, "min_headway");
  r.metrics.lane_change_times = m.at("lane_change_times").get<std::vector<double>>();
  return r;
}

nlohmann::json to_json(const OracleConfig& c) {
  return {{"imminent_ttc", c.imminent_ttc},
          {"imminent_headway", c.imminent_headway},
          {"intent_window", c.intent_window},
          {"settle_window", c.settle_window},
          {"set_speed_tolerance", c.set_speed_tolerance}};
}

OracleConfig oracle_config_from_json(const nlohmann::json& j) {
  OracleConfig c;
  c.imminent_ttc = j.value("imminent_ttc", c.imminent_ttc);
  c.imminent_headway = j.value("imminent_headway", c.imminent_headway);
  c.intent_window = j.value("intent_window", c.intent_window);
  c.settle_window = j.value("settle_window", c.settle_window);
  c.set_speed_tolerance = j.value("set_speed_tolerance", c.set_speed_tolerance);
  return c;
}

}  // namespace simloop
