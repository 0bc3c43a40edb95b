#include <doctest.h>

#include "simloop/cli.hpp"
#include "simloop/scenario_io.hpp"

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace simloop;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "simloop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string src(const std::string& rel) { return std::string(SIMLOOP_SOURCE_DIR) + "/" + rel; }

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"evaluate"}).code == kExitUsage);
  CHECK(cli({"evaluate", "--code", "/nonexistent"}).code == kExitUsage);
  CHECK(cli({"evaluate", "--code", src("demo/reference/gold.ref"), "--tc", "TC42"}).code == kExitUsage);
  CHECK(cli({"evaluate", "--code", src("demo/reference/gold.ref"), "--tc", "ACC1"}).code == kExitUsage);
  CHECK(cli({"scenario", "export", "--tc", "nope"}).code == kExitUsage);
  CHECK(cli({"stats", "--ledger", "/nonexistent"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitPass);
}

TEST_CASE("evaluate exit codes follow the verdicts") {
  const auto gold = cli({"evaluate", "--code", src("demo/reference/gold.ref")});
  CHECK(gold.code == kExitPass);
  CHECK(gold.out.find("Passed 7 of 7 test cases.") != std::string::npos);
  const auto naive = cli({"evaluate", "--code", src("demo/reference/naive.ref"), "--tc", "TC1,TC6"});
  CHECK(naive.code == kExitFail);
  CHECK(naive.out.find("Passed 1 of 2 test cases.") != std::string::npos);
  CHECK(cli({"evaluate", "--code", src("demo/reference/gold.ref"), "--mode", "acc"}).code == kExitPass);
}

TEST_CASE("evaluate over the process transport") {
  const auto r = cli({"evaluate", "--code", src("demo/reference/eager.ref"), "--tc", "TC6", "--transport", "process",
                      "--shim", SIMLOOP_REFSHIM});
  CHECK(r.code == kExitFail);
  CHECK(r.out.find("SR3") != std::string::npos);
  CHECK(cli({"evaluate", "--code", src("demo/reference/gold.ref"), "--tc", "TC6", "--transport", "process",
             "--shim", "/nonexistent/shim"})
            .code == kExitUsage);
}

TEST_CASE("scenario export, custom scenarios and replay") {
  const auto dir = fresh_dir("simloop_cli_test");
  fs::create_directories(dir);
  const auto scn = (dir / "tc5.scn").string();
  CHECK(cli({"scenario", "export", "--tc", "TC5", "--out", scn}).code == kExitPass);
  CHECK(load_scenario_file(scn) == build_test_case("TC5"));

  auto custom = build_test_case("TC6");
  custom.id = "Quiet";
  std::ofstream(dir / "quiet.scn") << serialize_scenario(custom);
  const auto traces = (dir / "traces").string();
  const auto r = cli({"evaluate", "--code", src("demo/reference/eager.ref"), "--scenario", (dir / "quiet.scn").string(),
                      "--traces", traces});
  CHECK(r.code == kExitFail);

  const auto csv = (dir / "traces" / "Quiet.csv").string();
  REQUIRE(fs::exists(csv));
  CHECK(cli({"replay", "--trace", csv}).code == kExitUsage);  // not in the catalog
  const auto replay = cli({"replay", "--trace", csv, "--scenario", (dir / "quiet.scn").string()});
  CHECK(replay.code == kExitFail);
  CHECK(replay.out.find("Test case Quiet failed: SR3 violated.") == 0);
  const auto table = cli({"replay", "--trace", csv, "--scenario", (dir / "quiet.scn").string(), "--format", "csv"});
  CHECK(table.code == kExitPass);
  CHECK(table.out.rfind("time,ego_s,ego_lat,ego_speed,ego_lane,headway,ttc\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("run, report and stats") {
  const auto dir = fresh_dir("simloop_cli_run");
  const auto r = cli({"run", "--config", src("demo/scripted_session/config.json"), "--out", dir.string(), "--quiet"});
  CHECK(r.code == kExitPass);
  CHECK(r.out.find("stopped: gold") == 0);
  CHECK(cli({"run", "--config", src("demo/scripted_session/config.json"), "--out", dir.string()}).code == kExitUsage);

  const auto rep = cli({"report", "--ledger", dir.string(), "--candidate", "C25"});
  CHECK(rep.code == kExitFail);
  CHECK(rep.out.find("Passed 4 of 7 test cases.") != std::string::npos);
  CHECK(cli({"report", "--ledger", dir.string(), "--candidate", "C26"}).code == kExitPass);
  CHECK(cli({"report", "--ledger", dir.string(), "--candidate", "C99"}).code == kExitUsage);

  const auto stats = cli({"stats", "--ledger", dir.string(), "--json"});
  CHECK(stats.code == kExitPass);
  const auto j = nlohmann::json::parse(stats.out);
  CHECK(j["total_candidates"] == 26);
  fs::remove_all(dir);
}

TEST_CASE("the installed binary behaves like run_cli") {
  const std::string cmd = std::string(SIMLOOP_CLI) + " evaluate --code " + src("demo/reference/naive.ref") +
                          " --tc TC6 > /dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == kExitPass);
  const int bad = std::system((std::string(SIMLOOP_CLI) + " bogus 2> /dev/null").c_str());
  REQUIRE(WIFEXITED(bad));
  CHECK(WEXITSTATUS(bad) == kExitUsage);
}
