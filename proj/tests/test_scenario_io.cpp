#include <doctest.h>

#include "simloop/scenario_io.hpp"
#include "support/random_scenario.hpp"

#include <filesystem>
#include <fstream>

using namespace simloop;

TEST_CASE("catalog scenarios round-trip through the text format") {
  for (const auto& id : all_catalog_ids()) {
    CAPTURE(id);
    const auto spec = build_test_case(id);
    const auto text = serialize_scenario(spec);
    CHECK(parse_scenario(text) == spec);
    CHECK(serialize_scenario(parse_scenario(text)) == text);
  }
}

TEST_CASE("random scenarios round-trip") {
  for (std::uint32_t seed = 1; seed <= 200; ++seed) {
    const auto spec = random_check::random_scenario(seed);
    REQUIRE_NOTHROW(validate(spec));
    CHECK(parse_scenario(serialize_scenario(spec)) == spec);
  }
}

namespace {

const char* kMinimal = R"(# a comment
scenario Mini
mode caem
duration 5
description "Two lanes, one slow car ahead."

road
  lane_count 2
  lane_width 3.5
  length 500
end

ego
  lane 0
  speed 20
end

agent Slow
  lane 0
  offset 30
  speed 10
  phases
    hold 5
  end
end
)";

int syntax_line(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioSyntaxError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("optional fields take their defaults") {
  const auto s = parse_scenario(kMinimal);
  CHECK(s.id == "Mini");
  CHECK(s.road.lane_count == 2);
  CHECK(s.road.lane_width == kLaneWidth);
  CHECK(s.ego_start == 100.0);
  REQUIRE(s.agents.size() == 1);
  CHECK(s.agents[0].heading == 1);
  CHECK(s.agents[0].phases == std::vector<Phase>{phase::Hold{5.0}});
}

TEST_CASE("syntax errors carry a line number") {
  std::string t = kMinimal;
  CHECK(syntax_line("") == 1);
  CHECK(syntax_line(std::string(kMinimal).replace(t.find("speed 20"), 8, "speed fast")) == 15);
  CHECK(syntax_line(std::string(kMinimal).replace(t.find("hold 5"), 6, "wobble 5")) == 23);
  CHECK(syntax_line(std::string(kMinimal).replace(t.find("\"Two"), 1, "")) == 5);
  CHECK(syntax_line(std::string(kMinimal) + "bogus 1\n") == 26);
  std::string unterminated = kMinimal;
  unterminated.erase(unterminated.rfind("end"));
  CHECK(syntax_line(unterminated) > 0);
}

TEST_CASE("semantic errors surface as ScenarioInvalid") {
  std::string t = kMinimal;
  t.replace(t.find("lane 0\n  offset"), 6, "lane 5");
  CHECK_THROWS_AS(parse_scenario(t), ScenarioInvalid);
}

TEST_CASE("files") {
  const auto path = std::filesystem::temp_directory_path() / "simloop_scenario_io_test.scn";
  {
    std::ofstream f(path);
    f << serialize_scenario(build_test_case("TC5"));
  }
  CHECK(load_scenario_file(path.string()) == build_test_case("TC5"));
  std::filesystem::remove(path);
  CHECK_THROWS(load_scenario_file(path.string()));
}
