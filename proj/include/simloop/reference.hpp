#pragma once

// Reference controllers and a tiny directive language that selects them.
//
// A directive program is what the in-process runtime and the `refshim` peer
// accept as candidate "source code". It picks a policy per test case and can
// inject failures, which makes every executability class reproducible
// without a real code generator:
//
//   controller gold            # gold | naive | eager
//   use naive in TC1 TC2       # per-scenario override
//   fault runtime at tick 3 in TC4
//   fault hang at init
//
// See docs/reference-controllers.md.

#include "simloop/controller.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace simloop::reference {

enum class Policy { kGold, kNaive, kEager };
enum class FaultKind { kRuntime, kHang, kMalformed };

std::string_view to_string(Policy p);
std::string_view to_string(FaultKind f);

struct Fault {
  FaultKind kind = FaultKind::kRuntime;
  /// Tick at which the fault fires; absent means during the handshake.
  std::optional<int> tick;
  /// Scenario ids the fault applies to; empty means all.
  std::vector<std::string> scenarios;
  bool operator==(const Fault&) const = default;
};

struct Override {
  Policy policy = Policy::kGold;
  std::vector<std::string> scenarios;
  bool operator==(const Override&) const = default;
};

struct Program {
  Policy policy = Policy::kGold;
  std::vector<Override> overrides;
  std::vector<Fault> faults;
  bool operator==(const Program&) const = default;

  Policy policy_for(std::string_view scenario_id) const;
  /// First fault for this scenario at `tick` (absent tick = handshake).
  const Fault* fault_for(std::string_view scenario_id, std::optional<int> tick) const;
};

class ProgramSyntaxError : public std::runtime_error {
 public:
  ProgramSyntaxError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

Program parse_program(std::string_view text);

// Thresholds of the gold emergency manoeuvre.
namespace gold {
inline constexpr double kHeadwayTrigger = 0.7;
inline constexpr double kTtcTrigger = 3.9;
inline constexpr double kLaneMargin = 10.0;
inline constexpr double kAheadTtcLimit = 5.0;
inline constexpr double kBehindTtcLimit = 3.0;
// Intelligent driver model parameters for the cruise controller.
inline constexpr double kIdmTimeGap = 1.5;
inline constexpr double kIdmMinGap = 2.0;
inline constexpr double kIdmAccel = 1.5;
inline constexpr double kIdmDecel = 2.0;
}  // namespace gold

/// Nearest same-lane, same-direction vehicle ahead of the ego front bumper.
const AgentObservation* find_lead(const Observation& obs);

/// Whether the adjacent lane `lane` is inside the road and clear enough to enter.
bool lane_is_free(const Observation& obs, int lane);

/// One policy's decisions over a run. Stateful (the gold policy remembers its
/// last manoeuvre, the eager policy fires once).
class PolicyState {
 public:
  PolicyState(Policy policy, const InitMessage& init);
  ControlAction decide(const Observation& obs);

 private:
  ControlAction gold_caem(const Observation& obs);
  ControlAction gold_acc(const Observation& obs) const;

  Policy policy_;
  InitMessage init_;
  std::optional<double> busy_until_;
  bool eager_done_ = false;
};

/// What a session answers to one observation.
struct Reply {
  enum class Kind { kAct, kRuntimeError, kHang, kMalformed };
  Kind kind = Kind::kAct;
  ControlAction action;
  std::string message;
};

/// Text a malformed reply consists of.
inline constexpr std::string_view kMalformedLine = "{\"accel\":\"fast\"}";

/// Program + policy state for one scenario run, transport independent.
class Session {
 public:
  Session(Program program, InitMessage init);
  /// Fault that fires during the handshake, if any.
  const Fault* init_fault() const;
  Reply step(const Observation& obs);

 private:
  Program program_;
  InitMessage init_;
  PolicyState state_;
};

/// Runs directive programs in-process. Every message still goes through the
/// protocol codec so that encoding problems surface as they would over a pipe.
class InProcessRuntime : public ControllerRuntime {
 public:
  std::unique_ptr<Controller> spawn(const std::string& code, const InitMessage& init) override;
};

}  // namespace simloop::reference
