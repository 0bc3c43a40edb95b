#include "simloop/protocol.hpp"

#include "simloop/sim.hpp"

#include <algorithm>
#include <cmath>

namespace simloop::protocol {

using nlohmann::json;

namespace {

std::string line(const json& j) { return j.dump() + "\n"; }

const json& field(const json& msg, const char* key) {
  auto it = msg.find(key);
  if (it == msg.end()) throw MalformedMessage(std::string("missing field '") + key + "'");
  return *it;
}

double number_field(const json& msg, const char* key) {
  const auto& v = field(msg, key);
  if (!v.is_number()) throw MalformedMessage(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

int int_field(const json& msg, const char* key) {
  const auto& v = field(msg, key);
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 1e9) return static_cast<int>(d);
  }
  throw MalformedMessage(std::string("field '") + key + "' must be an integer");
}

std::string string_field(const json& msg, const char* key) {
  const auto& v = field(msg, key);
  if (!v.is_string()) throw MalformedMessage(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

std::string encode_init(const InitMessage& init) {
  json j = {{"type", "init"},
            {"scenario_id", init.scenario_id},
            {"mode", std::string(to_string(init.mode))},
            {"dt", init.dt},
            {"road", {{"lane_count", init.lane_count}, {"lane_width", init.lane_width}}},
            {"ego", {{"length", init.ego_length}, {"width", init.ego_width}}}};
  if (init.set_speed) j["set_speed"] = *init.set_speed;
  return line(j);
}

std::string encode_ready() { return line(json{{"type", "ready"}}); }

std::string encode_observe(const Observation& obs) {
  json agents = json::array();
  for (const auto& a : obs.agents) {
    agents.push_back({{"name", a.name},
                      {"s_relative", a.s_relative},
                      {"lat", a.lat},
                      {"lane", a.lane},
                      {"speed", a.speed},
                      {"heading", a.heading}});
  }
  json j = {{"type", "observe"},
            {"tick", obs.tick},
            {"time", obs.time},
            {"ego",
             {{"s", obs.ego.s},
              {"lat", obs.ego.lat},
              {"speed", obs.ego.speed},
              {"lane", obs.ego.lane},
              {"lane_count", obs.ego.lane_count},
              {"lane_width", obs.ego.lane_width}}},
            {"agents", agents}};
  return line(j);
}

std::string encode_act(const ControlAction& action) {
  return line(json{{"type", "act"}, {"accel", action.accel}, {"lane_change", action.lane_change}});
}

std::string encode_end() { return line(json{{"type", "end"}}); }

std::string encode_error(std::string_view kind, std::string_view message, std::optional<int> tick) {
  json j = {{"type", "error"}, {"kind", kind}, {"message", message}};
  if (tick) j["tick"] = *tick;
  return line(j);
}

InitMessage decode_init(const json& msg) {
  InitMessage init;
  init.scenario_id = string_field(msg, "scenario_id");
  try {
    init.mode = parse_mode(string_field(msg, "mode"));
  } catch (const std::invalid_argument& e) {
    throw MalformedMessage(e.what());
  }
  init.dt = number_field(msg, "dt");
  const auto& road = field(msg, "road");
  init.lane_count = int_field(road, "lane_count");
  init.lane_width = number_field(road, "lane_width");
  const auto& ego = field(msg, "ego");
  init.ego_length = number_field(ego, "length");
  init.ego_width = number_field(ego, "width");
  if (msg.contains("set_speed")) init.set_speed = number_field(msg, "set_speed");
  return init;
}

Observation decode_observe(const json& msg) {
  Observation obs;
  obs.tick = int_field(msg, "tick");
  obs.time = number_field(msg, "time");
  const auto& ego = field(msg, "ego");
  obs.ego.s = number_field(ego, "s");
  obs.ego.lat = number_field(ego, "lat");
  obs.ego.speed = number_field(ego, "speed");
  obs.ego.lane = int_field(ego, "lane");
  obs.ego.lane_count = int_field(ego, "lane_count");
  obs.ego.lane_width = number_field(ego, "lane_width");
  const auto& agents = field(msg, "agents");
  if (!agents.is_array()) throw MalformedMessage("field 'agents' must be an array");
  for (const auto& a : agents) {
    obs.agents.push_back(AgentObservation{string_field(a, "name"), number_field(a, "s_relative"),
                                          number_field(a, "lat"), int_field(a, "lane"),
                                          number_field(a, "speed"), int_field(a, "heading")});
  }
  return obs;
}

ControlAction decode_act(const json& msg) {
  ControlAction action;
  const double accel = number_field(msg, "accel");
  if (!std::isfinite(accel)) throw MalformedMessage("field 'accel' must be finite");
  action.accel = std::clamp(accel, -kAccelLimit, kAccelLimit);
  action.lane_change = int_field(msg, "lane_change");
  if (action.lane_change < -1 || action.lane_change > 1) {
    throw MalformedMessage("field 'lane_change' must be -1, 0 or 1");
  }
  return action;
}

json parse_line(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    std::string preview(text.substr(0, 200));
    throw MalformedMessage("not a JSON object: " + preview);
  }
  return j;
}

std::string message_type(const json& msg) {
  auto it = msg.find("type");
  if (it == msg.end()) return "act";
  if (!it->is_string()) throw MalformedMessage("field 'type' must be a string");
  return it->get<std::string>();
}

}  // namespace simloop::protocol
