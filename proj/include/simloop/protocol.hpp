#pragma once

// Line-delimited JSON tick protocol between the host and a controller process.
// One JSON object per line; see docs/protocol.md.

#include "simloop/controller.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace simloop::protocol {

/// A message that does not follow the schema.
class MalformedMessage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_init(const InitMessage& init);
std::string encode_ready();
std::string encode_observe(const Observation& obs);
std::string encode_act(const ControlAction& action);
std::string encode_end();
std::string encode_error(std::string_view kind, std::string_view message, std::optional<int> tick);

InitMessage decode_init(const nlohmann::json& msg);
Observation decode_observe(const nlohmann::json& msg);

/// Validates an `act` reply. Accel must be a finite number and lane_change one of
/// -1, 0, 1; accel is clamped to the physical limit. Throws MalformedMessage.
ControlAction decode_act(const nlohmann::json& msg);

/// Parses one line; throws MalformedMessage if it is not a JSON object.
nlohmann::json parse_line(std::string_view line);

/// Message type, or "act" for objects without a "type" field.
std::string message_type(const nlohmann::json& msg);

}  // namespace simloop::protocol
