#include <doctest.h>

#include "simloop/evaluation.hpp"
#include "simloop/host.hpp"
#include "simloop/reference.hpp"

#include <filesystem>
#include <fstream>

using namespace simloop;
using namespace std::chrono_literals;

namespace {

RuntimeConfig refshim_config() {
  RuntimeConfig rc;
  rc.shim_command = {SIMLOOP_REFSHIM};
  rc.source_suffix = ".ref";
  rc.handshake_timeout = 3000ms;
  rc.tick_timeout = 1000ms;
  return rc;
}

ExecutabilityStatus status_of(const std::string& code, const std::string& tc, RuntimeConfig rc = refshim_config()) {
  ProcessRuntime rt(rc);
  return run_test_case(code, build_test_case(tc), rt, {}).status;
}

}  // namespace

TEST_CASE("process transport matches the in-process transport") {
  ProcessRuntime proc(refshim_config());
  reference::InProcessRuntime inproc;
  for (const char* code : {"controller gold", "controller naive", "controller eager"}) {
    for (const char* tc : {"TC1", "TC4", "TC6"}) {
      CAPTURE(code);
      CAPTURE(tc);
      std::optional<SimTrace> a, b;
      const auto spec = build_test_case(tc);
      const auto oa = run_test_case(code, spec, proc, {}, &a);
      const auto ob = run_test_case(code, spec, inproc, {}, &b);
      CHECK(oa.status == ob.status);
      CHECK(oa.result == ob.result);
      CHECK(a == b);
    }
  }
  CHECK(live_child_count() == 0);
}

TEST_CASE("syntax errors are reported before the first tick") {
  const auto s = status_of("controller clever", "TC6");
  CHECK(s.kind == ExecutabilityStatus::Kind::kSyntaxError);
  CHECK(s.message.find("line 1") != std::string::npos);
  CHECK_FALSE(s.tick);
  CHECK(status_of(" \n", "TC6").kind == ExecutabilityStatus::Kind::kNoCode);
}

TEST_CASE("runtime failure at a tick carries the tick and stderr") {
  const auto s = status_of("controller gold\nfault runtime at tick 3", "TC6");
  CHECK(s.kind == ExecutabilityStatus::Kind::kRuntimeFailure);
  CHECK(s.tick == 3);
  CHECK(s.tc_id == "TC6");
  CHECK_FALSE(s.message.empty());
}

TEST_CASE("runtime failure during start-up") {
  const auto s = status_of("controller gold\nfault runtime at init", "TC6");
  CHECK(s.kind == ExecutabilityStatus::Kind::kRuntimeFailure);
  CHECK_FALSE(s.tick);
}

TEST_CASE("malformed replies") {
  const auto s = status_of("controller gold\nfault malformed at tick 4", "TC6");
  CHECK(s.kind == ExecutabilityStatus::Kind::kRuntimeFailure);
  CHECK(s.tick == 4);
  CHECK(s.message.find("malformed reply") != std::string::npos);
  const auto h = status_of("controller gold\nfault malformed at init", "TC6");
  CHECK(h.kind == ExecutabilityStatus::Kind::kRuntimeFailure);
  CHECK(h.message.find("malformed handshake") != std::string::npos);
}

TEST_CASE("hangs time out and the child is reaped") {
  auto rc = refshim_config();
  rc.handshake_timeout = 300ms;
  rc.tick_timeout = 200ms;
  const auto init = status_of("controller gold\nfault hang at init", "TC6", rc);
  CHECK(init.kind == ExecutabilityStatus::Kind::kTimeout);
  CHECK_FALSE(init.tick);
  const auto tick = status_of("controller gold\nfault hang at tick 5", "TC6", rc);
  CHECK(tick.kind == ExecutabilityStatus::Kind::kTimeout);
  CHECK(tick.tick == 5);
  CHECK(live_child_count() == 0);
}

TEST_CASE("a missing shim is a host error, not a candidate failure") {
  RuntimeConfig rc;
  rc.shim_command = {"/nonexistent/simloop-shim"};
  ProcessRuntime rt(rc);
  CHECK_THROWS_AS(rt.spawn("controller gold", make_init(build_test_case("TC6"), 0.05)), HostError);
  CHECK(live_child_count() == 0);
}

TEST_CASE("a shim that exits immediately is a syntax-class start-up failure") {
  RuntimeConfig rc;
  rc.shim_command = {"/bin/false"};
  ProcessRuntime rt(rc);
  try {
    rt.spawn("controller gold", make_init(build_test_case("TC6"), 0.05));
    FAIL("expected ControllerFailure");
  } catch (const ControllerFailure& e) {
    CHECK(e.status().kind == ExecutabilityStatus::Kind::kSyntaxError);
  }
  CHECK(live_child_count() == 0);
}

TEST_CASE("the temporary source file is removed after the run") {
  const auto tmp = std::filesystem::temp_directory_path();
  auto count = [&] {
    int n = 0;
    for (const auto& e : std::filesystem::directory_iterator(tmp)) n += e.path().filename().string().rfind("simloop", 0) == 0;
    return n;
  };
  const int before = count();
  CHECK(status_of("controller gold", "TC6").executable());
  CHECK(count() == before);
}
