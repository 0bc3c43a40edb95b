#include "simloop/reference.hpp"

#include "simloop/numfmt.hpp"
#include "simloop/protocol.hpp"
#include "simloop/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace simloop::reference {

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::kGold: return "gold";
    case Policy::kNaive: return "naive";
    case Policy::kEager: return "eager";
  }
  return "?";
}

std::string_view to_string(FaultKind f) {
  switch (f) {
    case FaultKind::kRuntime: return "runtime";
    case FaultKind::kHang: return "hang";
    case FaultKind::kMalformed: return "malformed";
  }
  return "?";
}

ProgramSyntaxError::ProgramSyntaxError(int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

bool applies(const std::vector<std::string>& scenarios, std::string_view id) {
  return scenarios.empty() || std::find(scenarios.begin(), scenarios.end(), id) != scenarios.end();
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<Policy> policy_named(std::string_view name) {
  if (name == "gold") return Policy::kGold;
  if (name == "naive") return Policy::kNaive;
  if (name == "eager") return Policy::kEager;
  return std::nullopt;
}

std::optional<FaultKind> fault_named(std::string_view name) {
  if (name == "runtime") return FaultKind::kRuntime;
  if (name == "hang") return FaultKind::kHang;
  if (name == "malformed") return FaultKind::kMalformed;
  return std::nullopt;
}

// Parses an optional trailing "in ID..." clause starting at index i.
std::vector<std::string> scenario_clause(const std::vector<std::string>& tok, std::size_t i, int line) {
  if (i == tok.size()) return {};
  if (tok[i] != "in") throw ProgramSyntaxError(line, "expected 'in', got '" + tok[i] + "'");
  if (i + 1 == tok.size()) throw ProgramSyntaxError(line, "'in' needs at least one scenario id");
  return {tok.begin() + static_cast<std::ptrdiff_t>(i + 1), tok.end()};
}

}  // namespace

Policy Program::policy_for(std::string_view scenario_id) const {
  for (const auto& o : overrides) {
    if (applies(o.scenarios, scenario_id)) return o.policy;
  }
  return policy;
}

const Fault* Program::fault_for(std::string_view scenario_id, std::optional<int> tick) const {
  for (const auto& f : faults) {
    if (f.tick == tick && applies(f.scenarios, scenario_id)) return &f;
  }
  return nullptr;
}

Program parse_program(std::string_view text) {
  Program prog;
  bool have_controller = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = tokenize(line);
    if (tok.empty()) continue;

    if (tok[0] == "controller") {
      if (tok.size() != 2) throw ProgramSyntaxError(line_no, "usage: controller gold|naive|eager");
      auto p = policy_named(tok[1]);
      if (!p) throw ProgramSyntaxError(line_no, "unknown controller '" + tok[1] + "'");
      if (have_controller) throw ProgramSyntaxError(line_no, "duplicate controller statement");
      prog.policy = *p;
      have_controller = true;
    } else if (tok[0] == "use") {
      if (tok.size() < 4 || tok[2] != "in") {
        throw ProgramSyntaxError(line_no, "usage: use <controller> in <scenario>...");
      }
      auto p = policy_named(tok[1]);
      if (!p) throw ProgramSyntaxError(line_no, "unknown controller '" + tok[1] + "'");
      prog.overrides.push_back(Override{*p, scenario_clause(tok, 2, line_no)});
    } else if (tok[0] == "fault") {
      if (tok.size() < 4 || tok[2] != "at") {
        throw ProgramSyntaxError(line_no, "usage: fault <kind> at init|tick N [in <scenario>...]");
      }
      auto kind = fault_named(tok[1]);
      if (!kind) throw ProgramSyntaxError(line_no, "unknown fault '" + tok[1] + "'");
      Fault f;
      f.kind = *kind;
      std::size_t next = 4;
      if (tok[3] == "init") {
        f.tick = std::nullopt;
      } else if (tok[3] == "tick" && tok.size() >= 5) {
        try {
          const auto n = parse_int(tok[4]);
          if (n < 0 || n > std::numeric_limits<int>::max()) throw std::invalid_argument("range");
          f.tick = static_cast<int>(n);
        } catch (const std::invalid_argument&) {
          throw ProgramSyntaxError(line_no, "tick must be a non-negative integer");
        }
        next = 5;
      } else {
        throw ProgramSyntaxError(line_no, "expected 'init' or 'tick N' after 'at'");
      }
      f.scenarios = scenario_clause(tok, next, line_no);
      prog.faults.push_back(std::move(f));
    } else {
      throw ProgramSyntaxError(line_no, "unknown statement '" + tok[0] + "'");
    }
  }
  if (!have_controller) throw ProgramSyntaxError(1, "missing controller statement");
  return prog;
}

const AgentObservation* find_lead(const Observation& obs) {
  const AgentObservation* best = nullptr;
  for (const auto& a : obs.agents) {
    if (a.heading != 1 || a.lane != obs.ego.lane || a.s_relative <= 0.0) continue;
    if (best == nullptr || a.s_relative < best->s_relative) best = &a;
  }
  return best;
}

bool lane_is_free(const Observation& obs, int lane) {
  if (lane < 0 || lane >= obs.ego.lane_count) return false;
  const double len = kVehicleLength;
  for (const auto& a : obs.agents) {
    if (a.lane != lane) continue;
    if (a.heading != 1) return false;
    const double front = a.s_relative;
    const double rear = a.s_relative - len;
    if (front >= -len - gold::kLaneMargin && rear <= gold::kLaneMargin) return false;
    if (rear > 0.0) {
      const double closing = obs.ego.speed - a.speed;
      if (closing > 0.0 && rear / closing < gold::kAheadTtcLimit) return false;
    } else {
      const double gap = -len - front;
      const double closing = a.speed - obs.ego.speed;
      if (closing > 0.0 && gap / closing < gold::kBehindTtcLimit) return false;
    }
  }
  return true;
}

PolicyState::PolicyState(Policy policy, const InitMessage& init) : policy_(policy), init_(init) {}

ControlAction PolicyState::decide(const Observation& obs) {
  switch (policy_) {
    case Policy::kNaive:
      return {};
    case Policy::kEager:
      if (!eager_done_ && obs.time >= 1.0 - 1e-9) {
        eager_done_ = true;
        return {0.0, 1};
      }
      return {};
    case Policy::kGold:
      return init_.mode == FunctionMode::kAcc ? gold_acc(obs) : gold_caem(obs);
  }
  return {};
}

ControlAction PolicyState::gold_caem(const Observation& obs) {
  if (busy_until_ && obs.time < *busy_until_ - 1e-9) return {};
  const auto* lead = find_lead(obs);
  if (lead == nullptr) return {};
  const double gap = lead->s_relative - kVehicleLength;
  const double v = obs.ego.speed;
  const double headway = v > 0.0 ? gap / v : std::numeric_limits<double>::infinity();
  const double closing = v - lead->speed;
  const double ttc = closing > 0.0 ? gap / closing : std::numeric_limits<double>::infinity();
  if (headway >= gold::kHeadwayTrigger && ttc >= gold::kTtcTrigger) return {};
  for (int dir : {-1, 1}) {
    if (lane_is_free(obs, obs.ego.lane + dir)) {
      busy_until_ = obs.time + kLaneChangeDuration;
      return {0.0, dir};
    }
  }
  return {};
}

ControlAction PolicyState::gold_acc(const Observation& obs) const {
  using namespace gold;
  const double v = obs.ego.speed;
  const double v0 = std::max(0.1, init_.set_speed.value_or(v));
  double accel = kIdmAccel * (1.0 - std::pow(v / v0, 4));
  if (const auto* lead = find_lead(obs)) {
    const double gap = std::max(0.1, lead->s_relative - kVehicleLength);
    const double dv = v - lead->speed;
    const double desired =
        kIdmMinGap + std::max(0.0, v * kIdmTimeGap + v * dv / (2.0 * std::sqrt(kIdmAccel * kIdmDecel)));
    accel -= kIdmAccel * (desired / gap) * (desired / gap);
  }
  return {std::clamp(accel, -kAccelLimit, kIdmAccel), 0};
}

Session::Session(Program program, InitMessage init)
    : program_(std::move(program)),
      init_(std::move(init)),
      state_(program_.policy_for(init_.scenario_id), init_) {}

const Fault* Session::init_fault() const { return program_.fault_for(init_.scenario_id, std::nullopt); }

Reply Session::step(const Observation& obs) {
  if (const auto* f = program_.fault_for(init_.scenario_id, obs.tick)) {
    switch (f->kind) {
      case FaultKind::kRuntime:
        return {Reply::Kind::kRuntimeError, {}, "injected failure"};
      case FaultKind::kHang:
        return {Reply::Kind::kHang, {}, {}};
      case FaultKind::kMalformed:
        return {Reply::Kind::kMalformed, {}, {}};
    }
  }
  return {Reply::Kind::kAct, state_.decide(obs), {}};
}

namespace {

class InProcessController : public Controller {
 public:
  explicit InProcessController(Session session) : session_(std::move(session)) {}

  ControlAction tick(const Observation& obs) override {
    const auto wire_obs = protocol::decode_observe(protocol::parse_line(protocol::encode_observe(obs)));
    const auto reply = session_.step(wire_obs);
    switch (reply.kind) {
      case Reply::Kind::kRuntimeError:
        throw ControllerFailure(ExecutabilityStatus::runtime(reply.message, obs.tick));
      case Reply::Kind::kHang:
        throw ControllerFailure(ExecutabilityStatus::timeout(obs.tick));
      case Reply::Kind::kMalformed:
      case Reply::Kind::kAct:
        break;
    }
    const std::string line = reply.kind == Reply::Kind::kMalformed
                                 ? std::string(kMalformedLine)
                                 : protocol::encode_act(reply.action);
    try {
      return protocol::decode_act(protocol::parse_line(line));
    } catch (const protocol::MalformedMessage& e) {
      throw ControllerFailure(
          ExecutabilityStatus::runtime(std::string("malformed reply: ") + e.what(), obs.tick));
    }
  }

 private:
  Session session_;
};

}  // namespace

std::unique_ptr<Controller> InProcessRuntime::spawn(const std::string& code, const InitMessage& init) {
  if (code.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ControllerFailure(ExecutabilityStatus::no_code());
  }
  Program program;
  try {
    program = parse_program(code);
  } catch (const ProgramSyntaxError& e) {
    throw ControllerFailure(ExecutabilityStatus::syntax(e.what()));
  }
  const auto wire_init = protocol::decode_init(protocol::parse_line(protocol::encode_init(init)));
  Session session(std::move(program), wire_init);
  if (const auto* f = session.init_fault()) {
    switch (f->kind) {
      case FaultKind::kHang:
        throw ControllerFailure(ExecutabilityStatus::timeout());
      case FaultKind::kRuntime:
        throw ControllerFailure(ExecutabilityStatus::runtime("injected failure during start-up"));
      case FaultKind::kMalformed:
        throw ControllerFailure(ExecutabilityStatus::runtime("malformed handshake"));
    }
  }
  return std::make_unique<InProcessController>(std::move(session));
}

}  // namespace simloop::reference
