#include "simloop/cli.hpp"

#include "simloop/evaluation.hpp"
#include "simloop/host.hpp"
#include "simloop/ledger.hpp"
#include "simloop/numfmt.hpp"
#include "simloop/orchestrator.hpp"
#include "simloop/reference.hpp"
#include "simloop/scenario_io.hpp"
#include "simloop/trace_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace simloop {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::string> split_command(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

struct EvaluateArgs {
  std::string code;
  std::string mode = "caem";
  std::string tc;
  std::vector<std::string> scenario_files;
  std::string transport = "inproc";
  std::string shim;
  double dt = kDefaultDt;
  std::string out_dir;
  bool parallel = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  if (!fs::is_regular_file(a.code)) throw UsageError("code file not found: " + a.code);
  const auto code = read_text(a.code);
  FunctionMode mode;
  try {
    mode = parse_mode(a.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::vector<ScenarioSpec> specs;
  for (const auto& f : a.scenario_files) {
    try {
      specs.push_back(load_scenario_file(f));
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  if (a.scenario_files.empty() || !a.tc.empty()) {
    const auto ids = a.tc.empty() ? catalog_ids(mode) : split_list(a.tc);
    for (const auto& id : ids) {
      try {
        specs.push_back(build_test_case(id));
      } catch (const UnknownScenario& e) {
        throw UsageError(e.what());
      }
    }
  }
  for (const auto& s : specs) {
    if (s.mode != mode) throw UsageError("test case " + s.id + " is not a " + std::string(to_string(mode)) + " test");
  }

  std::unique_ptr<ControllerRuntime> runtime;
  Transport transport;
  try {
    transport = parse_transport(a.transport);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (transport == Transport::kInProcess) {
    runtime = std::make_unique<reference::InProcessRuntime>();
  } else {
    RuntimeConfig rc;
    if (!a.shim.empty()) rc.shim_command = split_command(a.shim);
    runtime = std::make_unique<ProcessRuntime>(rc);
  }

  EvaluationOptions opts;
  opts.dt = a.dt;
  opts.parallel = a.parallel;
  const auto ev = evaluate_candidate(fs::path(a.code).filename().string(), code, specs, *runtime, opts);
  if (!a.out_dir.empty()) {
    for (const auto& t : ev.traces) {
      if (t) save_trace(*t, a.out_dir);
    }
  }
  out << ev.report.text();
  return ev.fully_executable() && ev.passed() == ev.total() ? kExitPass : kExitFail;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, bool quiet, std::ostream& out) {
  PipelineConfig cfg;
  try {
    cfg = load_pipeline_config(config_path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) throw UsageError("output directory is not empty: " + out_dir);

  ProgressFn progress;
  if (!quiet) {
    progress = [&out](const CandidateVersion& c, const BaselineState& b) {
      out << c.name() << " t" << c.initiation << (c.origin == Origin::kInitial ? " initial   " : " correction")
          << " P=" << c.passed() << "/" << c.total() << (c.executable() ? "" : " Ne")
          << (c.flagged_regression ? " flagged" : "") << "  baseline="
          << (b.current ? "C" + std::to_string(*b.current) : std::string("-")) << " P=" << b.passed
          << (b.gold ? " gold" : "") << "\n";
    };
  }
  const auto ledger = run_pipeline(cfg, progress);
  save_ledger(ledger, out_dir);
  out << "stopped: " << ledger.stop_reason << "\n";
  out << render_stats(compute_stats(ledger));
  return ledger.baseline.gold ? kExitPass : kExitFail;
}

int cmd_report(const std::string& ledger_dir, const std::string& candidate, std::ostream& out) {
  const auto dir = fs::path(ledger_dir) / "candidates" / candidate;
  if (!fs::is_directory(dir)) throw UsageError("no candidate " + candidate + " in " + ledger_dir);
  const auto report = report_from_json(nlohmann::json::parse(read_text((dir / "report.json").string())));
  out << report.text();
  return report.non_executable_tcs.empty() && report.passed_count == report.total ? kExitPass : kExitFail;
}

int cmd_stats(const std::string& ledger_dir, bool as_json, std::ostream& out) {
  RunLedger ledger;
  try {
    ledger = load_ledger(ledger_dir);
  } catch (const LedgerError& e) {
    throw UsageError(e.what());
  }
  const auto stats = compute_stats(ledger);
  if (as_json) out << to_json(stats).dump(2) << "\n";
  else out << render_stats(stats);
  return kExitPass;
}

int cmd_scenario_export(const std::string& tc, const std::string& out_file, std::ostream& out) {
  ScenarioSpec spec;
  try {
    spec = build_test_case(tc);
  } catch (const UnknownScenario& e) {
    throw UsageError(e.what());
  }
  const auto text = serialize_scenario(spec);
  if (out_file.empty()) {
    out << text;
  } else {
    std::ofstream f(out_file, std::ios::binary);
    f << text;
    if (!f) throw UsageError("cannot write " + out_file);
  }
  return kExitPass;
}

std::string opt_number(const std::optional<double>& v) { return v ? format_roundtrip(*v) : std::string(); }

int cmd_replay(const std::string& trace_path, const std::string& format, const std::string& scenario_file,
               std::ostream& out) {
  if (!fs::is_regular_file(trace_path)) throw UsageError("trace file not found: " + trace_path);
  const SimTrace trace = load_trace(trace_path);
  ScenarioSpec spec;
  try {
    spec = scenario_file.empty() ? build_test_case(trace.scenario_id) : load_scenario_file(scenario_file);
  } catch (const UnknownScenario&) {
    throw UsageError("trace of " + trace.scenario_id + " needs --scenario");
  }
  if (format == "csv") {
    out << "time,ego_s,ego_lat,ego_speed,ego_lane,headway,ttc\n";
    for (const auto& f : trace.frames) {
      const auto& ego = f.ego();
      out << format_roundtrip(f.time) << ',' << format_roundtrip(ego.s) << ',' << format_roundtrip(ego.lat) << ','
          << format_roundtrip(ego.speed) << ',' << ego.lane(trace.lane_width) << ','
          << opt_number(compute_headway(f, trace.lane_width)) << ',' << opt_number(compute_ttc(f, trace.lane_width))
          << '\n';
    }
    return kExitPass;
  }
  TestCaseOutcome outcome{spec, ExecutabilityStatus::ok(), evaluate(trace, spec)};
  const auto report = render_report("replay", {outcome});
  out << report.per_tc.front().text();
  return outcome.result->passed ? kExitPass : kExitFail;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scenario-based test loop for generated driving-function controllers", "simloop"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run the generate/evaluate/correct pipeline");
  run->add_option("--config", config_path, "Pipeline configuration (JSON)")->required();
  run->add_option("--out", out_dir, "Ledger directory to create")->required();
  run->add_flag("--quiet", quiet, "Do not print per-candidate progress");

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate one controller source file");
  evaluate_cmd->add_option("--code", ev.code, "Controller source file")->required();
  evaluate_cmd->add_option("--mode", ev.mode, "caem or acc");
  evaluate_cmd->add_option("--tc", ev.tc, "Comma-separated test case ids (default: all of the mode)");
  evaluate_cmd->add_option("--scenario", ev.scenario_files, "Scenario file(s) to run instead of / besides --tc");
  evaluate_cmd->add_option("--transport", ev.transport, "inproc (reference programs) or process (shim)");
  evaluate_cmd->add_option("--shim", ev.shim, "Shim command for --transport process");
  evaluate_cmd->add_option("--dt", ev.dt, "Simulation step in seconds");
  evaluate_cmd->add_option("--traces", ev.out_dir, "Directory to store traces in");
  evaluate_cmd->add_flag("--parallel", ev.parallel, "Run test cases concurrently");

  std::string ledger_dir, candidate;
  auto* report = app.add_subcommand("report", "Print a stored candidate report");
  report->add_option("--ledger", ledger_dir, "Ledger directory")->required();
  report->add_option("--candidate", candidate, "Candidate id, e.g. C3")->required();

  bool as_json = false;
  auto* stats = app.add_subcommand("stats", "Statistics over a stored run");
  stats->add_option("--ledger", ledger_dir, "Ledger directory")->required();
  stats->add_flag("--json", as_json, "Print JSON");

  std::string tc, export_file;
  auto* scenario = app.add_subcommand("scenario", "Scenario catalog tools");
  scenario->require_subcommand(1);
  auto* exp = scenario->add_subcommand("export", "Print a catalog scenario in the scenario file format");
  exp->add_option("--tc", tc, "Test case id")->required();
  exp->add_option("--out", export_file, "Write to a file instead of stdout");

  std::string trace_path, format = "text", scenario_file;
  auto* replay = app.add_subcommand("replay", "Re-evaluate a stored trace");
  replay->add_option("--trace", trace_path, "Trace CSV (the .events.jsonl sidecar is read too)")->required();
  replay->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
  replay->add_option("--scenario", scenario_file, "Scenario file for traces outside the catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, quiet, out);
    if (*evaluate_cmd) return cmd_evaluate(ev, out);
    if (*report) return cmd_report(ledger_dir, candidate, out);
    if (*stats) return cmd_stats(ledger_dir, as_json, out);
    if (*exp) return cmd_scenario_export(tc, export_file, out);
    if (*replay) return cmd_replay(trace_path, format, scenario_file, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const HostError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TraceParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace simloop
