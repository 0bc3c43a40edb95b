#include "simloop/trace_io.hpp"

#include "simloop/numfmt.hpp"
#include "simloop/oracle.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace simloop {

namespace fs = std::filesystem;

TraceParseError::TraceParseError(std::string file, int row, const std::string& message)
    : std::runtime_error(file + (row > 0 ? ":" + std::to_string(row) : std::string()) + ": " + message),
      file_(std::move(file)),
      row_(row) {}

std::string trace_to_csv(const SimTrace& trace) {
  std::string out(kTraceCsvHeader);
  out += '\n';
  for (const auto& f : trace.frames) {
    const std::string t = format_roundtrip(f.time);
    for (const auto& v : f.vehicles) {
      out += t;
      out += ',' + v.name;
      out += ',' + format_roundtrip(v.s);
      out += ',' + format_roundtrip(v.lat);
      out += ',' + format_roundtrip(v.speed);
      out += ',' + format_roundtrip(v.accel);
      out += ',' + std::to_string(v.heading);
      out += ',' + std::to_string(v.lane(trace.lane_width));
      out += '\n';
    }
  }
  return out;
}

std::string events_to_jsonl(const SimTrace& trace) {
  std::string out = nlohmann::json{{"scenario_id", trace.scenario_id},
                                   {"dt", trace.dt},
                                   {"lane_width", trace.lane_width}}
                        .dump() +
                    "\n";
  for (const auto& e : trace.events) out += to_json(e).dump() + "\n";
  return out;
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

}  // namespace

SimTrace trace_from_text(std::string_view csv, std::string_view events_jsonl) {
  SimTrace trace;

  const auto ev_lines = split_lines(events_jsonl);
  if (ev_lines.empty()) throw TraceParseError("events", 0, "missing metadata line");
  for (std::size_t i = 0; i < ev_lines.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    if (ev_lines[i].empty()) continue;
    nlohmann::json j = nlohmann::json::parse(ev_lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw TraceParseError("events", row, "not a JSON object");
    try {
      if (i == 0) {
        trace.scenario_id = j.at("scenario_id").get<std::string>();
        trace.dt = j.at("dt").get<double>();
        trace.lane_width = j.at("lane_width").get<double>();
      } else {
        trace.events.push_back(event_from_json(j));
      }
    } catch (const std::exception& e) {
      throw TraceParseError("events", row, e.what());
    }
  }
  if (!(trace.lane_width > 0.0)) throw TraceParseError("events", 1, "lane_width must be positive");

  const auto lines = split_lines(csv);
  if (lines.empty() || lines[0] != kTraceCsvHeader) {
    throw TraceParseError("csv", 1, "expected header '" + std::string(kTraceCsvHeader) + "'");
  }
  std::string_view current_time;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    const auto line = lines[i];
    if (line.empty()) {
      if (i + 1 == lines.size()) break;
      throw TraceParseError("csv", row, "empty row");
    }
    const auto f = split_fields(line);
    if (f.size() != 8) {
      throw TraceParseError("csv", row, "expected 8 fields, got " + std::to_string(f.size()));
    }
    VehicleState v;
    double time = 0.0;
    long long lane = 0;
    try {
      time = parse_double(f[0]);
      v.name = std::string(f[1]);
      v.s = parse_double(f[2]);
      v.lat = parse_double(f[3]);
      v.speed = parse_double(f[4]);
      v.accel = parse_double(f[5]);
      v.heading = static_cast<int>(parse_int(f[6]));
      lane = parse_int(f[7]);
    } catch (const std::invalid_argument& e) {
      throw TraceParseError("csv", row, e.what());
    }
    if (v.name.empty()) throw TraceParseError("csv", row, "empty vehicle name");
    if (v.heading != 1 && v.heading != -1) throw TraceParseError("csv", row, "heading must be 1 or -1");
    for (double x : {time, v.s, v.lat, v.speed, v.accel}) {
      if (!std::isfinite(x)) throw TraceParseError("csv", row, "non-finite number");
    }
    if (lane != v.lane(trace.lane_width)) throw TraceParseError("csv", row, "lane does not match lat");

    if (trace.frames.empty() || f[0] != current_time) {
      if (!trace.frames.empty() && !(time > trace.frames.back().time)) {
        throw TraceParseError("csv", row, "time must increase between frames");
      }
      if (v.name != kEgoName) throw TraceParseError("csv", row, "each frame must start with the ego row");
      trace.frames.push_back(TraceFrame{time, {}});
      current_time = f[0];
    } else if (trace.frames.back().find(v.name) != nullptr) {
      throw TraceParseError("csv", row, "duplicate vehicle '" + v.name + "' in frame");
    }
    trace.frames.back().vehicles.push_back(std::move(v));
  }
  if (trace.frames.empty()) throw TraceParseError("csv", 0, "no frames");
  return trace;
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

fs::path events_path_for(const fs::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".events.jsonl");
  return p;
}

fs::path save_trace(const SimTrace& trace, const fs::path& dir) {
  fs::create_directories(dir);
  const auto csv = dir / (trace.scenario_id + ".csv");
  write_file(csv, trace_to_csv(trace));
  write_file(events_path_for(csv), events_to_jsonl(trace));
  return csv;
}

SimTrace load_trace(const fs::path& csv_path) {
  const auto ev_path = events_path_for(csv_path);
  const auto csv = read_file(csv_path);
  const auto events = read_file(ev_path);
  try {
    return trace_from_text(csv, events);
  } catch (const TraceParseError& e) {
    const auto& file = e.file() == "csv" ? csv_path : ev_path;
    const std::string what = e.what();
    throw TraceParseError(file.string(), e.row(), what.substr(what.find(": ") + 2));
  }
}

}  // namespace simloop
