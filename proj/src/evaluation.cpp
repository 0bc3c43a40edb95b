#include "simloop/evaluation.hpp"

#include <future>

namespace simloop {

TestCaseOutcome run_test_case(const std::string& code, const ScenarioSpec& spec, ControllerRuntime& runtime,
                              const EvaluationOptions& opts, std::optional<SimTrace>* trace_out) {
  TestCaseOutcome outcome;
  outcome.spec = spec;
  try {
    auto controller = runtime.spawn(code, make_init(spec, opts.dt));
    SimTrace trace = run_simulation(spec, *controller, opts.dt);
    controller->finish();
    outcome.status = ExecutabilityStatus::ok();
    outcome.result = evaluate(trace, spec, opts.oracle);
    if (trace_out) *trace_out = std::move(trace);
  } catch (const ControllerFailure& failure) {
    outcome.status = failure.status();
    outcome.status.tc_id = spec.id;
  }
  return outcome;
}

CandidateEvaluation evaluate_candidate(const std::string& candidate_id, const std::string& code,
                                       const std::vector<ScenarioSpec>& specs, ControllerRuntime& runtime,
                                       const EvaluationOptions& opts) {
  CandidateEvaluation ev;
  ev.outcomes.resize(specs.size());
  ev.traces.resize(specs.size());
  if (opts.parallel && specs.size() > 1) {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      jobs.push_back(std::async(std::launch::async, [&, i] {
        ev.outcomes[i] = run_test_case(code, specs[i], runtime, opts, &ev.traces[i]);
      }));
    }
    for (auto& j : jobs) j.get();
  } else {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      ev.outcomes[i] = run_test_case(code, specs[i], runtime, opts, &ev.traces[i]);
    }
  }
  ev.report = render_report(candidate_id, ev.outcomes);
  return ev;
}

}  // namespace simloop
