#include <doctest.h>

#include "simloop/reference.hpp"
#include "simloop/scenario.hpp"
#include "simloop/sim.hpp"

#include <cmath>
#include <set>

using namespace simloop;

namespace {

class Idle : public Controller {
 public:
  ControlAction tick(const Observation&) override { return {}; }
};

const VehicleState& by_name(const TraceFrame& f, const std::string& n) { return *f.find(n); }

}  // namespace

TEST_CASE("catalog ids") {
  CHECK(catalog_ids(FunctionMode::kCaem) == std::vector<std::string>{"TC1", "TC2", "TC3", "TC4", "TC5", "TC6", "TC7"});
  CHECK(catalog_ids(FunctionMode::kAcc) == std::vector<std::string>{"ACC1", "ACC2", "ACC3"});
  CHECK(all_catalog_ids().size() == 10);
  CHECK_THROWS_AS(build_test_case("TC8"), UnknownScenario);
}

TEST_CASE("catalog is pure and valid") {
  for (const auto& id : all_catalog_ids()) {
    CAPTURE(id);
    const auto a = build_test_case(id);
    CHECK(a == build_test_case(id));
    CHECK(a.id == id);
    CHECK_NOTHROW(validate(a));
    CHECK_FALSE(a.description.empty());
  }
}

TEST_CASE("ego speeds of TC1-TC3") {
  CHECK(build_test_case("TC1").ego_speed == doctest::Approx(33.3333).epsilon(1e-4));
  CHECK(build_test_case("TC2").ego_speed == doctest::Approx(22.2222).epsilon(1e-4));
  CHECK(build_test_case("TC3").ego_speed == doctest::Approx(11.1111).epsilon(1e-4));
  CHECK(build_test_case("TC1").ego_lane == 1);
}

TEST_CASE("expected outcomes") {
  CHECK(build_test_case("TC1").expected_outcome.lane_change_required);
  CHECK(build_test_case("TC6").expected_outcome.lane_change_forbidden);
  CHECK(build_test_case("TC7").expected_outcome.lane_change_forbidden);
  CHECK(build_test_case("TC7").road.oncoming_strip.has_value());
  CHECK(build_test_case("ACC1").mode == FunctionMode::kAcc);
  CHECK(build_test_case("ACC1").set_speed.has_value());
}

TEST_CASE("solve_initial_offset") {
  // Gap at cut-in end = 0.4 * 11.11 = 4.444; the Over-Taker gains 0.56 m/s for 6 s.
  CHECK(solve_initial_offset(11.11, 11.67, 6.0, 0.4, 5.0) == doctest::Approx(1.084).epsilon(1e-9));
  CHECK(solve_initial_offset(20.0, 20.0, 6.0, 0.4, 5.0) == doctest::Approx(8.0));
  CHECK_THROWS_AS(solve_initial_offset(30.0, 40.0, 6.0, 0.4, 5.0), ScenarioInfeasible);
  CHECK_THROWS_AS(solve_initial_offset(30.0, 20.0, 6.0, 0.4, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_initial_offset(0.0, 1.0, 6.0, 0.4, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_initial_offset(10.0, 11.0, 0.0, 0.4, 5.0), std::invalid_argument);
}

TEST_CASE("TC1-TC3 headway at deceleration onset is 0.4 s in simulation") {
  for (const char* id : {"TC1", "TC2", "TC3"}) {
    CAPTURE(id);
    const auto spec = build_test_case(id);
    Idle idle;
    const auto trace = run_simulation(spec, idle, 0.05);
    const TraceFrame* at = nullptr;
    for (const auto& f : trace.frames) {
      if (std::abs(f.time - catalog::kCutInEnd) < 1e-9) at = &f;
    }
    REQUIRE(at != nullptr);
    const auto& ego = at->ego();
    const auto& ot = by_name(*at, "OverTaker");
    CHECK(ot.lane(spec.road.lane_width) == ego.lane(spec.road.lane_width));
    const double headway = (ot.rear() - ego.s) / ego.speed;
    CHECK(std::abs(headway - 0.4) <= 0.05);
  }
}

TEST_CASE("TC4 blocker sits 40 m ahead of the ego at deceleration onset") {
  const auto spec = build_test_case("TC4");
  Idle idle;
  const auto trace = run_simulation(spec, idle, 0.05);
  for (const auto& f : trace.frames) {
    if (std::abs(f.time - catalog::kCutInEnd) > 1e-9) continue;
    const double gap = by_name(f, "Blocker").rear() - f.ego().s;
    CHECK(gap == doctest::Approx(catalog::kBlockerGapAtDecelOnset).epsilon(1e-6));
  }
}

TEST_CASE("validation names the offending field") {
  auto s = build_test_case("TC1");
  s.agents[0].heading = 0;
  try {
    validate(s);
    FAIL("expected ScenarioInvalid");
  } catch (const ScenarioInvalid& e) {
    CHECK(e.field() == "agents[0].heading");
  }

  s = build_test_case("TC1");
  s.ego_lane = 3;
  CHECK_THROWS_AS(validate(s), ScenarioInvalid);
  s = build_test_case("TC1");
  s.agents.push_back(s.agents[0]);
  CHECK_THROWS_AS(validate(s), ScenarioInvalid);
  s = build_test_case("TC1");
  s.expected_outcome.lane_change_forbidden = true;
  CHECK_THROWS_AS(validate(s), ScenarioInvalid);
  s = build_test_case("TC6");
  AgentScript a;
  a.name = "X";
  a.initial_lane = -1;
  a.phases = {phase::Hold{1.0}};
  s.agents.push_back(a);
  CHECK_THROWS_AS(validate(s), ScenarioInvalid);  // no oncoming strip on TC6
  s = build_test_case("TC7");
  s.agents[0].phases.push_back(phase::Static{});
  CHECK_THROWS_AS(validate(s), ScenarioInvalid);
}

TEST_CASE("mode parsing") {
  CHECK(parse_mode("acc") == FunctionMode::kAcc);
  CHECK(parse_mode("CAEM") == FunctionMode::kCaem);
  CHECK_THROWS_AS(parse_mode("lka"), std::invalid_argument);
  CHECK(to_string(FunctionMode::kAcc) == "acc");
}
