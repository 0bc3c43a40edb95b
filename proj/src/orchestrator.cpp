#include "simloop/orchestrator.hpp"

#include "simloop/reference.hpp"
#include "simloop/trace_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

namespace simloop {

namespace fs = std::filesystem;

std::string_view to_string(Transport t) { return t == Transport::kInProcess ? "inproc" : "process"; }

Transport parse_transport(std::string_view text) {
  if (text == "inproc") return Transport::kInProcess;
  if (text == "process") return Transport::kProcess;
  throw std::invalid_argument("unknown transport: " + std::string(text));
}

void PipelineConfig::validate() const {
  if (initiations_max < 1) throw std::invalid_argument("initiations_max must be >= 1");
  if (correction_depth < 0) throw std::invalid_argument("correction_depth must be >= 0");
  if (!(dt > 0.0 && dt <= 0.2)) throw std::invalid_argument("dt must be in (0, 0.2]");
  if (runtime.shim_command.empty()) throw std::invalid_argument("runtime.shim_command must not be empty");
  model.validate();
  for (const auto& id : resolved_test_cases()) {
    const auto spec = build_test_case(id);
    if (spec.mode != mode) throw std::invalid_argument("test case " + id + " belongs to another mode");
  }
}

std::vector<std::string> PipelineConfig::resolved_test_cases() const {
  return test_cases.empty() ? catalog_ids(mode) : test_cases;
}

nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j = {{"initiations_max", c.initiations_max},
                      {"correction_depth", c.correction_depth},
                      {"stop_on_gold", c.stop_on_gold},
                      {"mode", std::string(to_string(c.mode))},
                      {"test_cases", c.resolved_test_cases()},
                      {"dt", c.dt},
                      {"model", to_json(c.model)},
                      {"oracle", to_json(c.oracle)},
                      {"transport", std::string(to_string(c.transport))},
                      {"runtime",
                       {{"shim_command", c.runtime.shim_command},
                        {"source_suffix", c.runtime.source_suffix},
                        {"handshake_timeout_ms", c.runtime.handshake_timeout.count()},
                        {"tick_timeout_ms", c.runtime.tick_timeout.count()}}},
                      {"parallel_tests", c.parallel_tests},
                      {"parallel_initiations", c.parallel_initiations}};
  if (!c.context_text.empty()) j["context_text"] = c.context_text;
  if (!c.task_text.empty()) j["task_text"] = c.task_text;
  return j;
}

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; })) {
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  check_keys(j,
             {"initiations_max", "correction_depth", "stop_on_gold", "mode", "test_cases", "dt", "model", "oracle",
              "transport", "runtime", "parallel_tests", "parallel_initiations", "context_text", "task_text",
              "context_file", "task_file"},
             "config");
  PipelineConfig c;
  try {
    c.initiations_max = j.value("initiations_max", c.initiations_max);
    c.correction_depth = j.value("correction_depth", c.correction_depth);
    c.stop_on_gold = j.value("stop_on_gold", c.stop_on_gold);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.test_cases = j.value("test_cases", c.test_cases);
    c.dt = j.value("dt", c.dt);
    if (j.contains("model")) {
      c.model = model_config_from_json(j.at("model"));
      c.model.mock_playlist = resolve(c.model.mock_playlist, base_dir);
    }
    if (j.contains("oracle")) c.oracle = oracle_config_from_json(j.at("oracle"));
    if (j.contains("transport")) c.transport = parse_transport(j.at("transport").get<std::string>());
    if (j.contains("runtime")) {
      const auto& r = j.at("runtime");
      check_keys(r, {"shim_command", "source_suffix", "handshake_timeout_ms", "tick_timeout_ms"}, "runtime");
      c.runtime.shim_command = r.value("shim_command", c.runtime.shim_command);
      if (!c.runtime.shim_command.empty()) {
        // A relative executable path (with a slash) is taken relative to the config file.
        auto& exe = c.runtime.shim_command.front();
        if (exe.find('/') != std::string::npos) exe = resolve(exe, base_dir);
      }
      c.runtime.source_suffix = r.value("source_suffix", c.runtime.source_suffix);
      c.runtime.handshake_timeout =
          std::chrono::milliseconds(r.value("handshake_timeout_ms", c.runtime.handshake_timeout.count()));
      c.runtime.tick_timeout = std::chrono::milliseconds(r.value("tick_timeout_ms", c.runtime.tick_timeout.count()));
    }
    c.parallel_tests = j.value("parallel_tests", c.parallel_tests);
    c.parallel_initiations = j.value("parallel_initiations", c.parallel_initiations);
    c.context_text = j.value("context_text", c.context_text);
    c.task_text = j.value("task_text", c.task_text);
    if (j.contains("context_file")) c.context_text = read_text(resolve(j.at("context_file").get<std::string>(), base_dir));
    if (j.contains("task_file")) c.task_text = read_text(resolve(j.at("task_file").get<std::string>(), base_dir));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  const auto text = read_text(path);
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument(path + ": not valid JSON");
  return pipeline_config_from_json(j, fs::path(path).parent_path().string());
}

const CandidateVersion* RunLedger::find(int id) const {
  for (const auto& c : candidates) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

BaselineState compare_to_baseline(const CandidateVersion& candidate, const BaselineState& baseline) {
  if (!candidate.executable()) return baseline;
  if (baseline.current && candidate.passed() <= baseline.passed) return baseline;
  return BaselineState{candidate.id, candidate.passed(), candidate.gold()};
}

std::string_view to_string(RegressionClass::Kind k) {
  switch (k) {
    case RegressionClass::Kind::kImproved: return "Improved";
    case RegressionClass::Kind::kUnchanged: return "Unchanged";
    case RegressionClass::Kind::kRegressed: return "Regressed";
    case RegressionClass::Kind::kNonExecutable: return "NonExecutable";
  }
  return "?";
}

RegressionClass classify_regression(const CandidateVersion& parent, const CandidateVersion& child) {
  if (!child.executable()) return {RegressionClass::Kind::kNonExecutable, 0};
  const int delta = child.passed() - parent.passed();
  if (delta > 0) return {RegressionClass::Kind::kImproved, delta};
  if (delta < 0) return {RegressionClass::Kind::kRegressed, delta};
  return {RegressionClass::Kind::kUnchanged, 0};
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::unique_ptr<ControllerRuntime> make_runtime(const PipelineConfig& cfg) {
  if (cfg.transport == Transport::kInProcess) return std::make_unique<reference::InProcessRuntime>();
  return std::make_unique<ProcessRuntime>(cfg.runtime);
}

namespace {

struct Context {
  const PipelineConfig& cfg;
  ModelGateway& gateway;
  ControllerRuntime& runtime;
  std::vector<ScenarioSpec> specs;
  std::vector<std::string> descriptions;
  std::string context_text;
  std::string task_text;
  EvaluationOptions eval;
};

struct Evaluated {
  CandidateVersion candidate;
  std::vector<std::optional<SimTrace>> traces;
};

Evaluated produce(const Context& ctx, int id, int initiation, const CandidateVersion* parent) {
  Evaluated out;
  auto& c = out.candidate;
  c.id = id;
  c.initiation = initiation;
  c.origin = parent ? Origin::kCorrection : Origin::kInitial;
  if (parent) c.parent = parent->id;

  try {
    const auto bundle = parent ? build_correction_prompt(ctx.context_text, ctx.descriptions, parent->source,
                                                         parent->report, ctx.task_text)
                               : build_specification_prompt(ctx.context_text, ctx.task_text);
    c.prompt = bundle.rendered();
    c.reply = ctx.gateway.complete(bundle);
    c.source = extract_code(c.reply).value_or("");
  } catch (const GatewayError& e) {
    c.gateway_error = e.what();
  }

  auto ev = evaluate_candidate(c.name(), c.source, ctx.specs, ctx.runtime, ctx.eval);
  c.report = ev.report;
  for (std::size_t i = 0; i < ev.outcomes.size(); ++i) {
    c.statuses.push_back(ev.outcomes[i].status);
    if (ev.outcomes[i].result) c.results.push_back(*ev.outcomes[i].result);
    if (ev.traces[i]) c.trace_digests[ev.traces[i]->scenario_id] = fnv1a_hex(trace_to_csv(*ev.traces[i]));
  }
  out.traces = std::move(ev.traces);
  return out;
}

// One initiation: the initial candidate and its correction chain. Ids are
// assigned from `next_id` onwards.
std::vector<Evaluated> run_initiation(const Context& ctx, int initiation, int next_id) {
  std::vector<Evaluated> chain;
  chain.push_back(produce(ctx, next_id++, initiation, nullptr));
  for (int depth = 0; depth < ctx.cfg.correction_depth; ++depth) {
    const auto& parent = chain.back().candidate;
    if (parent.gold() || parent.source.empty()) break;
    chain.push_back(produce(ctx, next_id++, initiation, &parent));
  }
  return chain;
}

void renumber(std::vector<Evaluated>& chain, int first_id) {
  std::map<int, int> remap;
  for (auto& e : chain) {
    remap[e.candidate.id] = first_id;
    e.candidate.id = first_id++;
    e.candidate.report.candidate_id = e.candidate.name();
  }
  for (auto& e : chain) {
    if (e.candidate.parent) e.candidate.parent = remap.at(*e.candidate.parent);
  }
}

}  // namespace

RunLedger run_pipeline(const PipelineConfig& cfg, ModelGateway& gateway, ControllerRuntime& runtime,
                       const ProgressFn& progress) {
  cfg.validate();
  Context ctx{cfg, gateway, runtime, {}, {}, {}, {}, {}};
  for (const auto& id : cfg.resolved_test_cases()) {
    ctx.specs.push_back(build_test_case(id));
    ctx.descriptions.push_back(ctx.specs.back().description);
  }
  ctx.context_text = cfg.context_text.empty() ? default_context(cfg.mode) : cfg.context_text;
  ctx.task_text = cfg.task_text.empty() ? default_task(cfg.mode) : cfg.task_text;
  ctx.eval.dt = cfg.dt;
  ctx.eval.oracle = cfg.oracle;
  ctx.eval.parallel = cfg.parallel_tests;

  RunLedger ledger;
  ledger.config = cfg;
  ledger.stop_reason = "initiations_exhausted";
  int next_id = 1;

  // Appends one initiation's candidates; returns false once the run must stop.
  auto absorb = [&](std::vector<Evaluated> chain) {
    ++ledger.initiations_completed;
    for (auto& e : chain) {
      auto& c = e.candidate;
      if (c.origin == Origin::kCorrection && !c.executable()) c.flagged_regression = true;
      const auto before = ledger.baseline;
      ledger.baseline = compare_to_baseline(c, ledger.baseline);
      if (ledger.baseline != before) ledger.promotions.push_back({c.id, c.passed(), ledger.baseline.gold});
      if (progress) progress(c, ledger.baseline);
      ledger.traces[c.id] = std::move(e.traces);
      ledger.candidates.push_back(std::move(c));
      if (ledger.baseline.gold && cfg.stop_on_gold) {
        ledger.stop_reason = "gold";
        return false;
      }
    }
    return true;
  };

  if (cfg.parallel_initiations) {
    std::vector<std::future<std::vector<Evaluated>>> jobs;
    for (int n = 1; n <= cfg.initiations_max; ++n) {
      jobs.push_back(std::async(std::launch::async, [&ctx, n] { return run_initiation(ctx, n, 1); }));
    }
    bool go_on = true;
    for (auto& job : jobs) {
      auto chain = job.get();
      if (!go_on) continue;
      renumber(chain, next_id);
      next_id += static_cast<int>(chain.size());
      go_on = absorb(std::move(chain));
    }
  } else {
    for (int n = 1; n <= cfg.initiations_max; ++n) {
      auto chain = run_initiation(ctx, n, next_id);
      next_id += static_cast<int>(chain.size());
      if (!absorb(std::move(chain))) break;
    }
  }
  return ledger;
}

RunLedger run_pipeline(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  auto gateway = make_gateway(cfg.model);
  auto runtime = make_runtime(cfg);
  return run_pipeline(cfg, *gateway, *runtime, progress);
}

}  // namespace simloop
