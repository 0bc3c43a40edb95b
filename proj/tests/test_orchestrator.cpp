#include <doctest.h>

#include "simloop/orchestrator.hpp"
#include "simloop/reference.hpp"

#include <filesystem>
#include <mutex>
#include <random>

using namespace simloop;
namespace fs = std::filesystem;

namespace {

// Returns replies from a fixed list; the last one repeats.
class ListGateway : public ModelGateway {
 public:
  explicit ListGateway(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const PromptBundle& bundle) override {
    std::lock_guard lock(mu_);
    prompts.push_back(bundle);
    const auto i = std::min(next_++, replies_.size() - 1);
    return replies_[i];
  }
  std::vector<PromptBundle> prompts;

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
  std::mutex mu_;
};

class FailingGateway : public ModelGateway {
 public:
  std::string complete(const PromptBundle&) override { throw TransportError("connection refused"); }
};

std::string fenced(const std::string& code) { return "```\n" + code + "\n```\n"; }

CandidateVersion version(int id, int passed, int total, bool executable) {
  CandidateVersion c;
  c.id = id;
  c.report.passed_count = passed;
  c.report.total = total;
  if (!executable) c.report.non_executable_tcs = {"TC1"};
  return c;
}

PipelineConfig base_config() {
  PipelineConfig cfg;
  cfg.model.model = "list";
  cfg.model.mock_playlist = "unused";
  cfg.initiations_max = 3;
  return cfg;
}

std::vector<Promotion> scripted_promotions() {
  return {{1, 3, false}, {2, 5, false}, {3, 6, false}, {26, 7, true}};
}

}  // namespace

TEST_CASE("baseline rule") {
  BaselineState b;
  b = compare_to_baseline(version(1, 0, 7, true), b);
  CHECK(b.current == 1);  // first executable candidate always becomes the baseline
  CHECK(compare_to_baseline(version(2, 5, 7, false), b) == b);  // Ne never promotes
  b = compare_to_baseline(version(3, 4, 7, true), b);
  CHECK(b.current == 3);
  CHECK(compare_to_baseline(version(4, 4, 7, true), b) == b);  // ties keep the incumbent
  b = compare_to_baseline(version(5, 7, 7, true), b);
  CHECK(b.gold);
}

TEST_CASE("baseline P is monotone over any candidate sequence") {
  std::mt19937 rng(5);
  for (int run = 0; run < 200; ++run) {
    BaselineState b;
    int last = -1;
    for (int i = 1; i <= 30; ++i) {
      const int p = std::uniform_int_distribution<int>(0, 7)(rng);
      const bool ex = std::uniform_int_distribution<int>(0, 3)(rng) != 0;
      b = compare_to_baseline(version(i, p, 7, ex), b);
      if (b.current) {
        CHECK(b.passed >= last);
        last = b.passed;
      }
    }
  }
}

TEST_CASE("regression classes") {
  const auto parent = version(1, 4, 7, true);
  CHECK(classify_regression(parent, version(2, 6, 7, true)) == RegressionClass{RegressionClass::Kind::kImproved, 2});
  CHECK(classify_regression(parent, version(2, 4, 7, true)).kind == RegressionClass::Kind::kUnchanged);
  CHECK(classify_regression(parent, version(2, 1, 7, true)) == RegressionClass{RegressionClass::Kind::kRegressed, -3});
  CHECK(classify_regression(parent, version(2, 7, 7, false)).kind == RegressionClass::Kind::kNonExecutable);
}

TEST_CASE("initiations with corrections") {
  auto cfg = base_config();
  ListGateway gw({fenced("controller naive"), fenced("controller naive\nuse gold in TC1"), fenced("controller gold")});
  reference::InProcessRuntime rt;
  const auto ledger = run_pipeline(cfg, gw, rt);
  REQUIRE(ledger.candidates.size() == 3);
  CHECK(ledger.candidates[0].origin == Origin::kInitial);
  CHECK(ledger.candidates[1].origin == Origin::kCorrection);
  CHECK(ledger.candidates[1].parent == 1);
  CHECK(ledger.candidates[1].initiation == 1);
  CHECK(ledger.candidates[2].initiation == 2);
  CHECK(ledger.stop_reason == "gold");
  CHECK(ledger.initiations_completed == 2);
  CHECK(ledger.promotions == std::vector<Promotion>{{1, 2, false}, {2, 3, false}, {3, 7, true}});

  REQUIRE(gw.prompts.size() == 3);
  CHECK(gw.prompts[0].kind == PromptKind::kSpecification);
  CHECK(gw.prompts[1].kind == PromptKind::kCorrection);
  CHECK(gw.prompts[1].sections[2].text == "controller naive\n");
  CHECK(gw.prompts[1].sections[3].text == ledger.candidates[0].report.text());
  CHECK(gw.prompts[2].kind == PromptKind::kSpecification);  // initiations do not share state
}

TEST_CASE("gold initial versions are not corrected; depth 0 disables corrections") {
  auto cfg = base_config();
  cfg.stop_on_gold = false;
  ListGateway gw({fenced("controller gold")});
  reference::InProcessRuntime rt;
  const auto ledger = run_pipeline(cfg, gw, rt);
  CHECK(ledger.candidates.size() == 3);
  CHECK(ledger.stop_reason == "initiations_exhausted");
  CHECK(ledger.promotions.size() == 1);

  cfg.correction_depth = 0;
  ListGateway naive({fenced("controller naive")});
  const auto l2 = run_pipeline(cfg, naive, rt);
  CHECK(l2.candidates.size() == 3);
  for (const auto& c : l2.candidates) CHECK(c.origin == Origin::kInitial);
}

TEST_CASE("deeper correction chains follow the latest version") {
  auto cfg = base_config();
  cfg.initiations_max = 1;
  cfg.correction_depth = 3;
  ListGateway gw({fenced("controller naive")});
  reference::InProcessRuntime rt;
  const auto ledger = run_pipeline(cfg, gw, rt);
  REQUIRE(ledger.candidates.size() == 4);
  CHECK(ledger.candidates[3].parent == 3);
  CHECK(ledger.stop_reason == "initiations_exhausted");
}

TEST_CASE("non-executable corrections are flagged and never promoted") {
  auto cfg = base_config();
  cfg.initiations_max = 1;
  ListGateway gw({fenced("controller naive"), fenced("controller gold\nfault runtime at tick 3 in TC2")});
  reference::InProcessRuntime rt;
  const auto ledger = run_pipeline(cfg, gw, rt);
  REQUIRE(ledger.candidates.size() == 2);
  CHECK(ledger.candidates[1].flagged_regression);
  CHECK(ledger.candidates[1].passed() == 6);
  CHECK(ledger.baseline.current == 1);
}

TEST_CASE("gateway failures and prose replies become NoCode candidates") {
  auto cfg = base_config();
  cfg.initiations_max = 2;
  FailingGateway fail;
  reference::InProcessRuntime rt;
  const auto ledger = run_pipeline(cfg, fail, rt);
  REQUIRE(ledger.candidates.size() == 2);  // no correction without source
  for (const auto& c : ledger.candidates) {
    CHECK(c.gateway_error);
    CHECK(c.source.empty());
    CHECK_FALSE(c.executable());
    for (const auto& s : c.statuses) CHECK(s.kind == ExecutabilityStatus::Kind::kNoCode);
  }
  CHECK_FALSE(ledger.baseline.current);

  ListGateway prose({"I think the controller should brake earlier and change lanes when needed."});
  const auto l2 = run_pipeline(cfg, prose, rt);
  CHECK(l2.candidates.size() == 2);
  CHECK(l2.candidates[0].source.empty());
  CHECK_FALSE(l2.candidates[0].gateway_error);
}

TEST_CASE("parallel initiations give the same ledger as sequential ones") {
  auto cfg = base_config();
  cfg.initiations_max = 4;
  reference::InProcessRuntime rt;
  ListGateway a({fenced("controller eager")});
  ListGateway b({fenced("controller eager")});
  const auto seq = run_pipeline(cfg, a, rt);
  cfg.parallel_initiations = true;
  cfg.parallel_tests = true;
  const auto par = run_pipeline(cfg, b, rt);
  CHECK(seq.candidates == par.candidates);
  CHECK(seq.promotions == par.promotions);
}

TEST_CASE("configuration") {
  PipelineConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // no model source
  cfg.model.mock_playlist = "x";
  CHECK_NOTHROW(cfg.validate());
  cfg.initiations_max = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.initiations_max = 1;
  cfg.test_cases = {"ACC1"};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // wrong mode
  cfg.test_cases = {"TC9"};
  CHECK_THROWS(cfg.validate());
  cfg.test_cases = {};
  CHECK(cfg.resolved_test_cases().size() == 7);

  const auto scripted = load_pipeline_config(std::string(SIMLOOP_SOURCE_DIR) + "/demo/scripted_session/config.json");
  CHECK(scripted.initiations_max == 20);
  CHECK(fs::path(scripted.model.mock_playlist) == fs::path(SIMLOOP_SOURCE_DIR) / "demo/scripted_session/replies");
  const auto j = to_json(scripted);
  CHECK(to_json(pipeline_config_from_json(j)) == j);
  auto bad = j;
  bad["initiation_max"] = 3;
  CHECK_THROWS_AS(pipeline_config_from_json(bad), std::invalid_argument);
  CHECK(parse_transport("process") == Transport::kProcess);
  CHECK_THROWS(parse_transport("carrier-pigeon"));
}

TEST_CASE("scripted playlist reproduces the promotion sequence") {
  const auto cfg = load_pipeline_config(std::string(SIMLOOP_SOURCE_DIR) + "/demo/scripted_session/config.json");
  const auto ledger = run_pipeline(cfg);
  CHECK(ledger.promotions == scripted_promotions());
  CHECK(ledger.stop_reason == "gold");
  CHECK(ledger.initiations_completed == 13);
  REQUIRE(ledger.candidates.size() == 26);
  CHECK(ledger.candidates[24].passed() == 4);
  CHECK(ledger.candidates[24].origin == Origin::kInitial);
  CHECK(ledger.candidates[9].flagged_regression);
  CHECK(ledger.candidates[9].statuses.front().kind == ExecutabilityStatus::Kind::kSyntaxError);
}

TEST_CASE("fnv1a") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
