#include "simloop/report.hpp"

#include "simloop/numfmt.hpp"

#include <algorithm>
#include <regex>

namespace simloop {

namespace {

std::string seconds(double t) { return format_fixed(t, 1); }
std::string speed(double v) { return format_fixed(v, 2); }

std::string collision_partner(const Event& e) {
  if (e.subject == kEgoName) return e.object.value_or("unknown");
  return e.subject;
}

std::size_t catalog_rank(const std::string& id) {
  static const auto ids = all_catalog_ids();
  auto it = std::find(ids.begin(), ids.end(), id);
  return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace

std::string render_event(const Event& e) {
  switch (e.kind) {
    case EventKind::kCollision:
      return "Ego was involved in a collision at time: " + seconds(e.time) + " seconds with a speed of " +
             speed(e.ego_speed_at_event) + " m/s, colliding with: " + collision_partner(e) + ".";
    case EventKind::kOffRoad:
      return "Ego exited the drivable area at time: " + seconds(e.time) + " seconds.";
    case EventKind::kLaneChangeCompleted:
      return "Ego completed a lane change at time: " + seconds(e.time) + " seconds.";
  }
  return {};
}

std::string render_violation(const Violation& v, const ScenarioSpec& spec) {
  const double t = v.event ? v.event->time : 0.0;
  switch (v.requirement) {
    case Requirement::kSR1:
    case Requirement::kSR2:
      return v.event ? render_event(*v.event) : std::string("Ego violated ") + std::string(to_string(v.requirement)) + ".";
    case Requirement::kSR3:
      return "Ego performed an unintended lane change at time: " + seconds(t) +
             " seconds with no imminent collision ahead.";
    case Requirement::kForbiddenLaneChange:
      return "Ego changed lanes at time: " + seconds(t) +
             " seconds although no lane change is permitted in this test case.";
    case Requirement::kTimeGapOutOfRange: {
      std::string range;
      if (spec.expected_outcome.time_gap_range) {
        range = " of " + seconds(spec.expected_outcome.time_gap_range->first) + " to " +
                seconds(spec.expected_outcome.time_gap_range->second) + " seconds";
      }
      if (!v.measured) return "Ego had no measurable time gap to a lead vehicle at the end of the test case.";
      return "Ego kept a time gap of " + speed(*v.measured) +
             " seconds to the lead vehicle at the end of the test case, outside the required range" + range +
             ".";
    }
    case Requirement::kSetSpeedNotReached:
      return "Ego ended the test case at a speed of " + speed(v.measured.value_or(0.0)) +
             " m/s instead of the set speed of " + speed(spec.set_speed.value_or(0.0)) + " m/s.";
    case Requirement::kExpectedManoeuvreMissing:
      return "Note: Ego did not perform the expected evasive lane change.";
  }
  return {};
}

std::string render_verdict(const TestCaseOutcome& o) {
  const auto& id = o.spec.id;
  if (!o.status.executable() || !o.result) {
    std::string line = "Test case " + id + " not executable: " + std::string(to_string(o.status.kind));
    if (!o.status.message.empty()) line += ": " + o.status.message;
    if (o.status.tick) line += " (tick " + std::to_string(*o.status.tick) + ")";
    return line;
  }
  if (o.result->passed) return "Test case " + id + " passed: all acceptance criteria satisfied.";
  std::vector<std::string_view> reqs;
  for (const auto& v : o.result->violations) {
    const auto name = to_string(v.requirement);
    if (std::find(reqs.begin(), reqs.end(), name) == reqs.end()) reqs.push_back(name);
  }
  std::string line = "Test case " + id + " failed: ";
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    if (i > 0) line += ", ";
    line += reqs[i];
  }
  return line + " violated.";
}

TestReport render_report(const std::string& candidate_id, const std::vector<TestCaseOutcome>& outcomes) {
  std::vector<const TestCaseOutcome*> ordered;
  for (const auto& o : outcomes) ordered.push_back(&o);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return catalog_rank(a->spec.id) < catalog_rank(b->spec.id);
  });

  TestReport report;
  report.candidate_id = candidate_id;
  report.total = static_cast<int>(outcomes.size());
  for (const auto* o : ordered) {
    TestCaseSection sec;
    sec.tc_id = o->spec.id;
    sec.description = o->spec.description;
    sec.verdict = render_verdict(*o);
    sec.executable = o->status.executable() && o->result.has_value();
    if (sec.executable) {
      sec.passed = o->result->passed;
      for (const auto& v : o->result->violations) sec.narrative.push_back(render_violation(v, o->spec));
      for (const auto& v : o->result->advisories) sec.narrative.push_back(render_violation(v, o->spec));
    } else {
      report.non_executable_tcs.push_back(sec.tc_id);
    }
    if (sec.passed) ++report.passed_count;
    report.per_tc.push_back(std::move(sec));
  }
  return report;
}

std::string TestReport::summary_line() const {
  return "Passed " + std::to_string(passed_count) + " of " + std::to_string(total) + " test cases.";
}

std::string TestCaseSection::text() const {
  std::string out = verdict + "\n";
  for (const auto& line : narrative) out += line + "\n";
  return out + "\n";
}

std::string TestReport::text() const {
  std::string out;
  for (const auto& sec : per_tc) out += sec.text();
  out += summary_line() + "\n";
  return out;
}

int parse_passed_count(std::string_view report_text) {
  static const std::regex re(R"(Passed (\d+) of (\d+) test cases\.)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(report_text.begin(), report_text.end(), m, re)) {
    throw std::invalid_argument("report has no summary line");
  }
  return std::stoi(m[1].str());
}

nlohmann::json to_json(const TestReport& r) {
  nlohmann::json sections = nlohmann::json::array();
  for (const auto& s : r.per_tc) {
    sections.push_back({{"tc_id", s.tc_id},
                        {"description", s.description},
                        {"verdict", s.verdict},
                        {"narrative", s.narrative},
                        {"passed", s.passed},
                        {"executable", s.executable}});
  }
  return {{"candidate_id", r.candidate_id},
          {"per_tc", sections},
          {"summary",
           {{"passed_count", r.passed_count}, {"total", r.total}, {"non_executable_tcs", r.non_executable_tcs}}}};
}

TestReport report_from_json(const nlohmann::json& j) {
  TestReport r;
  r.candidate_id = j.at("candidate_id").get<std::string>();
  for (const auto& s : j.at("per_tc")) {
    r.per_tc.push_back(TestCaseSection{s.at("tc_id").get<std::string>(), s.at("description").get<std::string>(),
                                       s.at("verdict").get<std::string>(),
                                       s.at("narrative").get<std::vector<std::string>>(),
                                       s.at("passed").get<bool>(), s.at("executable").get<bool>()});
  }
  const auto& sum = j.at("summary");
  r.passed_count = sum.at("passed_count").get<int>();
  r.total = sum.at("total").get<int>();
  r.non_executable_tcs = sum.at("non_executable_tcs").get<std::vector<std::string>>();
  return r;
}

}  // namespace simloop
