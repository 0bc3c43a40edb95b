#include <doctest.h>

#include "simloop/evaluation.hpp"
#include "simloop/reference.hpp"
#include "simloop/report.hpp"

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace simloop;

namespace {

std::vector<ScenarioSpec> caem() {
  std::vector<ScenarioSpec> out;
  for (const auto& id : catalog_ids(FunctionMode::kCaem)) out.push_back(build_test_case(id));
  return out;
}

CandidateEvaluation eval(const std::string& code) {
  reference::InProcessRuntime rt;
  return evaluate_candidate("C1", code, caem(), rt);
}

}  // namespace

TEST_CASE("collision sentence for a no-op controller on TC1") {
  const auto ev = eval("controller naive");
  const auto& sec = ev.report.per_tc.front();
  CHECK(sec.tc_id == "TC1");
  REQUIRE_FALSE(sec.narrative.empty());
  static const std::regex re(
      R"(Ego was involved in a collision at time: \d+\.\d seconds with a speed of 33\.33 m/s, colliding with: OverTaker\.)");
  CHECK(std::regex_match(sec.narrative.front(), re));
  CHECK(sec.verdict == "Test case TC1 failed: SR1 violated.");
}

TEST_CASE("gold report") {
  const auto ev = eval("controller gold");
  CHECK(ev.report.summary_line() == "Passed 7 of 7 test cases.");
  for (const auto& s : ev.report.per_tc) {
    CHECK(s.passed);
    CHECK(s.narrative.empty());
    CHECK(s.verdict == "Test case " + s.tc_id + " passed: all acceptance criteria satisfied.");
  }
  CHECK(parse_passed_count(ev.report.text()) == 7);
}

TEST_CASE("eager report names SR3") {
  const auto ev = eval("controller eager");
  const auto& tc6 = ev.report.per_tc[5];
  CHECK(tc6.tc_id == "TC6");
  CHECK(tc6.verdict == "Test case TC6 failed: SR3 violated.");
  REQUIRE(tc6.narrative.size() == 1);
  CHECK(tc6.narrative[0] ==
        "Ego performed an unintended lane change at time: 3.0 seconds with no imminent collision ahead.");
}

TEST_CASE("non-executable sections") {
  const auto ev = eval("controller gold\nfault runtime at tick 40 in TC4");
  CHECK(ev.report.passed_count == 6);
  CHECK(ev.report.non_executable_tcs == std::vector<std::string>{"TC4"});
  CHECK(ev.report.per_tc[3].verdict == "Test case TC4 not executable: RuntimeFailure: injected failure (tick 40)");
  CHECK_FALSE(ev.fully_executable());

  const auto syn = eval("controller gold\nbogus");
  CHECK(syn.report.passed_count == 0);
  CHECK(syn.report.non_executable_tcs.size() == 7);
}

TEST_CASE("sections follow catalog order, extra scenarios last") {
  reference::InProcessRuntime rt;
  auto extra = build_test_case("TC6");
  extra.id = "Custom";
  const auto ev = evaluate_candidate("C1", "controller gold",
                                     {extra, build_test_case("TC3"), build_test_case("TC1")}, rt);
  REQUIRE(ev.report.per_tc.size() == 3);
  CHECK(ev.report.per_tc[0].tc_id == "TC1");
  CHECK(ev.report.per_tc[1].tc_id == "TC3");
  CHECK(ev.report.per_tc[2].tc_id == "Custom");
}

TEST_CASE("narratives for ACC findings") {
  Violation gap{Requirement::kTimeGapOutOfRange, std::nullopt, 4.25};
  CHECK(render_violation(gap, build_test_case("ACC1")) ==
        "Ego kept a time gap of 4.25 seconds to the lead vehicle at the end of the test case, outside the required "
        "range of 1.0 to 3.0 seconds.");
  Violation speed{Requirement::kSetSpeedNotReached, std::nullopt, 25.0};
  CHECK(render_violation(speed, build_test_case("ACC3")) ==
        "Ego ended the test case at a speed of 25.00 m/s instead of the set speed of 30.00 m/s.");
  Violation note{Requirement::kExpectedManoeuvreMissing, std::nullopt, std::nullopt};
  CHECK(render_violation(note, build_test_case("TC1")) == "Note: Ego did not perform the expected evasive lane change.");
}

TEST_CASE("parse_passed_count") {
  CHECK(parse_passed_count("blah\nPassed 3 of 7 test cases.\n") == 3);
  CHECK_THROWS_AS(parse_passed_count("nothing here"), std::invalid_argument);
}

TEST_CASE("reports are deterministic and round-trip through JSON") {
  const auto a = eval("controller naive");
  const auto b = eval("controller naive");
  CHECK(a.report.text() == b.report.text());
  CHECK(report_from_json(to_json(a.report)) == a.report);
}

TEST_CASE("parallel evaluation equals sequential") {
  reference::InProcessRuntime rt;
  EvaluationOptions par;
  par.parallel = true;
  const auto p = evaluate_candidate("C1", "controller eager", caem(), rt, par);
  const auto s = evaluate_candidate("C1", "controller eager", caem(), rt);
  CHECK(p.report == s.report);
}

TEST_CASE("collision goldfile") {
  const auto ev = eval("controller naive");
  std::ifstream f(std::filesystem::path(SIMLOOP_SOURCE_DIR) / "tests" / "golden" / "naive_caem_report.txt");
  REQUIRE(f);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ev.report.text() == ss.str());
}
