#include "simloop/controller.hpp"

namespace simloop {

std::string_view to_string(ExecutabilityStatus::Kind kind) {
  using K = ExecutabilityStatus::Kind;
  switch (kind) {
    case K::kExecutable: return "Executable";
    case K::kNoCode: return "NoCode";
    case K::kSyntaxError: return "SyntaxError";
    case K::kRuntimeFailure: return "RuntimeFailure";
    case K::kTimeout: return "Timeout";
  }
  return "?";
}

ExecutabilityStatus::Kind parse_status_kind(std::string_view text) {
  using K = ExecutabilityStatus::Kind;
  for (K k : {K::kExecutable, K::kNoCode, K::kSyntaxError, K::kRuntimeFailure, K::kTimeout}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown executability status: " + std::string(text));
}

namespace {
std::string describe(const ExecutabilityStatus& s) {
  std::string out(to_string(s.kind));
  if (!s.tc_id.empty()) out += " in " + s.tc_id;
  if (s.tick) out += " at tick " + std::to_string(*s.tick);
  if (!s.message.empty()) out += ": " + s.message;
  return out;
}
}  // namespace

ControllerFailure::ControllerFailure(ExecutabilityStatus status)
    : std::runtime_error(describe(status)), status_(std::move(status)) {}

}  // namespace simloop
