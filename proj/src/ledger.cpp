#include "simloop/ledger.hpp"

#include "simloop/numfmt.hpp"
#include "simloop/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace simloop {

namespace fs = std::filesystem;

namespace {

bool has_start_failure(const CandidateVersion& c) {
  return std::any_of(c.statuses.begin(), c.statuses.end(), [](const ExecutabilityStatus& s) {
    return s.kind == ExecutabilityStatus::Kind::kNoCode || s.kind == ExecutabilityStatus::Kind::kSyntaxError;
  });
}

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

}  // namespace

RunStats compute_stats(const RunLedger& ledger) {
  if (ledger.candidates.empty()) throw StatsError("ledger has no candidates");
  RunStats s;
  s.total_candidates = static_cast<int>(ledger.candidates.size());
  double sum_norm = 0.0, sum_raw = 0.0, sum_norm_pos = 0.0, sum_raw_pos = 0.0;
  for (const auto& c : ledger.candidates) {
    if (!has_start_failure(c) && !c.statuses.empty()) ++s.compilable_count;
    if (c.origin == Origin::kInitial) {
      ++s.initial_count;
      if (c.gold()) ++s.successful_initial;
      continue;
    }
    const auto* parent = c.parent ? ledger.find(*c.parent) : nullptr;
    if (parent == nullptr) throw StatsError(c.name() + " refers to a missing parent");
    if (!parent->executable()) continue;
    ++s.corrections_attempted;
    if (c.gold()) ++s.successful_corrected;
    if (!c.executable()) continue;
    ++s.corrections_fully_executable;
    const int delta = c.passed() - parent->passed();
    const double norm = ratio(delta, c.total());
    sum_raw += delta;
    sum_norm += norm;
    if (delta > 0) {
      ++s.improving_corrections;
      sum_raw_pos += delta;
      sum_norm_pos += norm;
    }
  }
  s.success_rate_initial = ratio(s.successful_initial, s.initial_count);
  s.success_rate_correction = ratio(s.successful_corrected, s.corrections_attempted);
  s.mean_delta_P_all_corrections = ratio(sum_norm, s.corrections_fully_executable);
  s.mean_delta_P_all_raw = ratio(sum_raw, s.corrections_fully_executable);
  s.mean_delta_P_improving_only = ratio(sum_norm_pos, s.improving_corrections);
  s.mean_delta_P_improving_raw = ratio(sum_raw_pos, s.improving_corrections);
  return s;
}

nlohmann::json to_json(const RunStats& s) {
  return {{"total_candidates", s.total_candidates},
          {"compilable_count", s.compilable_count},
          {"initial_count", s.initial_count},
          {"successful_initial", s.successful_initial},
          {"corrections_attempted", s.corrections_attempted},
          {"successful_corrected", s.successful_corrected},
          {"success_rate_initial", s.success_rate_initial},
          {"success_rate_correction", s.success_rate_correction},
          {"corrections_fully_executable", s.corrections_fully_executable},
          {"improving_corrections", s.improving_corrections},
          {"mean_delta_P_all_corrections", s.mean_delta_P_all_corrections},
          {"mean_delta_P_improving_only", s.mean_delta_P_improving_only},
          {"mean_delta_P_all_raw", s.mean_delta_P_all_raw},
          {"mean_delta_P_improving_raw", s.mean_delta_P_improving_raw}};
}

std::string format_percent(double fraction) {
  const double pct = fraction * 100.0;
  if (pct == 0.0) return "0%";
  const int magnitude = static_cast<int>(std::floor(std::log10(std::abs(pct))));
  return format_fixed(pct, std::max(0, 1 - magnitude)) + "%";
}

std::string render_stats(const RunStats& s) {
  std::ostringstream out;
  out << "candidates:                     " << s.total_candidates << "\n"
      << "compilable:                     " << s.compilable_count << "\n"
      << "success rate, initial versions: " << format_percent(s.success_rate_initial) << " ("
      << s.successful_initial << " of " << s.initial_count << ")\n"
      << "success rate, corrections:      " << format_percent(s.success_rate_correction) << " ("
      << s.successful_corrected << " of " << s.corrections_attempted << ")\n"
      << "mean dP / total, all:           " << format_percent(s.mean_delta_P_all_corrections) << " (over "
      << s.corrections_fully_executable << " corrections; raw " << format_fixed(s.mean_delta_P_all_raw, 2)
      << ")\n"
      << "mean dP / total, improving:     " << format_percent(s.mean_delta_P_improving_only) << " (over "
      << s.improving_corrections << " corrections; raw " << format_fixed(s.mean_delta_P_improving_raw, 2)
      << ")\n";
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json status_json(const ExecutabilityStatus& s) {
  nlohmann::json j = {{"tc_id", s.tc_id}, {"kind", std::string(to_string(s.kind))}, {"message", s.message}};
  j["tick"] = s.tick ? nlohmann::json(*s.tick) : nlohmann::json();
  return j;
}

ExecutabilityStatus status_from_json(const nlohmann::json& j) {
  ExecutabilityStatus s;
  s.tc_id = j.at("tc_id").get<std::string>();
  s.kind = parse_status_kind(j.at("kind").get<std::string>());
  s.message = j.at("message").get<std::string>();
  if (!j.at("tick").is_null()) s.tick = j.at("tick").get<int>();
  return s;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw LedgerError("cannot write " + p.string());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LedgerError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) {
  auto j = nlohmann::json::parse(read_file(p), nullptr, false);
  if (j.is_discarded()) throw LedgerError(p.string() + ": not valid JSON");
  return j;
}

std::string pretty(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace

nlohmann::json to_json(const CandidateVersion& c) {
  nlohmann::json statuses = nlohmann::json::array();
  for (const auto& s : c.statuses) statuses.push_back(status_json(s));
  nlohmann::json results = nlohmann::json::array();
  for (const auto& r : c.results) results.push_back(to_json(r));
  return {{"id", c.id},
          {"name", c.name()},
          {"initiation", c.initiation},
          {"origin", c.origin == Origin::kInitial ? "initial" : "correction"},
          {"parent", c.parent ? nlohmann::json(*c.parent) : nlohmann::json()},
          {"gateway_error", c.gateway_error ? nlohmann::json(*c.gateway_error) : nlohmann::json()},
          {"has_code", !c.source.empty()},
          {"passed", c.passed()},
          {"total", c.total()},
          {"executable", c.executable()},
          {"gold", c.gold()},
          {"flagged_regression", c.flagged_regression},
          {"statuses", statuses},
          {"results", results},
          {"trace_digests", c.trace_digests}};
}

CandidateVersion candidate_from_json(const nlohmann::json& j) {
  CandidateVersion c;
  c.id = j.at("id").get<int>();
  c.initiation = j.at("initiation").get<int>();
  const auto origin = j.at("origin").get<std::string>();
  if (origin == "initial") c.origin = Origin::kInitial;
  else if (origin == "correction") c.origin = Origin::kCorrection;
  else throw LedgerError("unknown origin '" + origin + "'");
  if (!j.at("parent").is_null()) c.parent = j.at("parent").get<int>();
  if (!j.at("gateway_error").is_null()) c.gateway_error = j.at("gateway_error").get<std::string>();
  c.flagged_regression = j.at("flagged_regression").get<bool>();
  for (const auto& s : j.at("statuses")) c.statuses.push_back(status_from_json(s));
  for (const auto& r : j.at("results")) c.results.push_back(result_from_json(r));
  c.trace_digests = j.at("trace_digests").get<std::map<std::string, std::string>>();
  return c;
}

fs::path candidate_dir(const fs::path& ledger_dir, int id) {
  return ledger_dir / "candidates" / ("C" + std::to_string(id));
}

void save_ledger(const RunLedger& ledger, const fs::path& dir) {
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    throw LedgerError("refusing to write into non-empty " + dir.string());
  }
  fs::create_directories(dir / "candidates");
  write_file(dir / "config.json", pretty(to_json(ledger.config)));

  for (const auto& c : ledger.candidates) {
    const auto cdir = candidate_dir(dir, c.id);
    write_file(cdir / "source", c.source);
    write_file(cdir / "prompt.txt", c.prompt);
    write_file(cdir / "reply.txt", c.reply);
    write_file(cdir / "report.txt", c.report.text());
    write_file(cdir / "report.json", pretty(to_json(c.report)));
    auto meta = to_json(c);
    if (c.origin == Origin::kCorrection && c.parent) {
      if (const auto* parent = ledger.find(*c.parent)) {
        const auto rc = classify_regression(*parent, c);
        meta["regression"] = {{"kind", std::string(to_string(rc.kind))}, {"delta", rc.delta}};
      }
    }
    write_file(cdir / "candidate.json", pretty(meta));
    if (auto it = ledger.traces.find(c.id); it != ledger.traces.end()) {
      for (const auto& t : it->second) {
        if (t) save_trace(*t, cdir / "traces");
      }
    }
  }

  std::string baseline;
  for (const auto& p : ledger.promotions) {
    baseline += nlohmann::json{{"candidate", "C" + std::to_string(p.candidate)}, {"passed", p.passed}, {"gold", p.gold}}
                    .dump() +
                "\n";
  }
  write_file(dir / "baseline.jsonl", baseline);

  nlohmann::json summary = {
      {"candidates", ledger.candidates.size()},
      {"initiations_completed", ledger.initiations_completed},
      {"stop_reason", ledger.stop_reason},
      {"baseline",
       {{"candidate", ledger.baseline.current ? nlohmann::json("C" + std::to_string(*ledger.baseline.current))
                                              : nlohmann::json()},
        {"passed", ledger.baseline.passed},
        {"gold", ledger.baseline.gold}}}};
  if (!ledger.candidates.empty()) summary["stats"] = to_json(compute_stats(ledger));
  write_file(dir / "summary.json", pretty(summary));
}

namespace {

int parse_candidate_name(const std::string& name) {
  if (name.size() < 2 || name[0] != 'C') throw LedgerError("bad candidate name '" + name + "'");
  try {
    return static_cast<int>(parse_int(std::string_view(name).substr(1)));
  } catch (const std::invalid_argument&) {
    throw LedgerError("bad candidate name '" + name + "'");
  }
}

}  // namespace

RunLedger load_ledger(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LedgerError("not a ledger directory: " + dir.string());
  RunLedger ledger;
  try {
    ledger.config = pipeline_config_from_json(read_json(dir / "config.json"));
  } catch (const std::invalid_argument& e) {
    throw LedgerError(std::string("config.json: ") + e.what());
  }

  std::vector<int> ids;
  if (fs::is_directory(dir / "candidates")) {
    for (const auto& e : fs::directory_iterator(dir / "candidates")) {
      if (e.is_directory()) ids.push_back(parse_candidate_name(e.path().filename().string()));
    }
  }
  std::sort(ids.begin(), ids.end());
  for (int id : ids) {
    const auto cdir = candidate_dir(dir, id);
    try {
      auto c = candidate_from_json(read_json(cdir / "candidate.json"));
      if (c.id != id) throw LedgerError("id mismatch");
      c.source = read_file(cdir / "source");
      c.prompt = read_file(cdir / "prompt.txt");
      c.reply = read_file(cdir / "reply.txt");
      c.report = report_from_json(read_json(cdir / "report.json"));
      ledger.candidates.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw LedgerError(cdir.string() + ": " + e.what());
    }
  }

  std::istringstream baseline(read_file(dir / "baseline.jsonl"));
  std::string line;
  while (std::getline(baseline, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw LedgerError("baseline.jsonl: bad line");
    ledger.promotions.push_back(
        {parse_candidate_name(j.at("candidate").get<std::string>()), j.at("passed").get<int>(), j.at("gold").get<bool>()});
  }

  const auto summary = read_json(dir / "summary.json");
  ledger.initiations_completed = summary.at("initiations_completed").get<int>();
  ledger.stop_reason = summary.at("stop_reason").get<std::string>();
  const auto& b = summary.at("baseline");
  if (!b.at("candidate").is_null()) ledger.baseline.current = parse_candidate_name(b.at("candidate").get<std::string>());
  ledger.baseline.passed = b.at("passed").get<int>();
  ledger.baseline.gold = b.at("gold").get<bool>();
  return ledger;
}

}  // namespace simloop
