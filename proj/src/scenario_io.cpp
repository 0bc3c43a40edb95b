#include "simloop/scenario_io.hpp"

#include "simloop/numfmt.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace simloop {

ScenarioSyntaxError::ScenarioSyntaxError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + message),
      line_(line),
      column_(column) {}

namespace {

struct Token {
  std::string text;
  int column = 1;
  bool quoted = false;
};

struct Line {
  int number = 0;
  std::vector<Token> tokens;
};

std::vector<Token> tokenize(std::string_view line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') break;
    Token tok;
    tok.column = static_cast<int>(i) + 1;
    if (c == '"') {
      tok.quoted = true;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        const char d = line[i];
        if (d == '"') {
          closed = true;
          ++i;
          break;
        }
        if (d == '\\') {
          if (i + 1 >= line.size()) break;
          const char e = line[i + 1];
          switch (e) {
            case '"': tok.text += '"'; break;
            case '\\': tok.text += '\\'; break;
            case 'n': tok.text += '\n'; break;
            case 't': tok.text += '\t'; break;
            case 'r': tok.text += '\r'; break;
            default:
              throw ScenarioSyntaxError(line_no, static_cast<int>(i) + 1,
                                        std::string("unknown escape '\\") + e + "'");
          }
          i += 2;
          continue;
        }
        tok.text += d;
        ++i;
      }
      if (!closed) throw ScenarioSyntaxError(line_no, tok.column, "unterminated string");
    } else {
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' &&
             line[i] != '#') {
        if (line[i] == '"') {
          throw ScenarioSyntaxError(line_no, static_cast<int>(i) + 1, "unexpected '\"'");
        }
        ++i;
      }
      tok.text = std::string(line.substr(start, i - start));
    }
    out.push_back(std::move(tok));
  }
  return out;
}

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    ++number;
    auto tokens = tokenize(text.substr(pos, end - pos), number);
    if (!tokens.empty()) lines.push_back(Line{number, std::move(tokens)});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : lines_(split_lines(text)) {
    // Position reported for errors at end of input.
    int count = 1;
    for (char c : text) count += c == '\n' ? 1 : 0;
    last_line_ = count;
  }

  ScenarioSpec parse() {
    if (lines_.empty()) throw ScenarioSyntaxError(1, 1, "empty scenario: expected 'scenario <id>'");
    ScenarioSpec spec;
    spec.agents.clear();
    std::set<std::string> seen;
    bool have_road = false;
    bool have_ego = false;

    const Line& head = next();
    if (head.tokens[0].text != "scenario") {
      fail(head, 0, "expected 'scenario <id>' as the first statement");
    }
    spec.id = single_arg(head);

    while (!at_end()) {
      const Line& line = next();
      const std::string& key = line.tokens[0].text;
      if (key == "agent") {
        spec.agents.push_back(parse_agent(line));
        continue;
      }
      once(seen, line);
      if (key == "mode") {
        const auto& v = single_arg_token(line);
        if (v.text != "caem" && v.text != "acc") fail(line, 1, "mode must be 'caem' or 'acc'");
        spec.mode = parse_mode(v.text);
      } else if (key == "duration") {
        spec.duration = number(line, 1);
        expect_args(line, 1);
      } else if (key == "description") {
        const auto& v = single_arg_token(line);
        if (!v.quoted) fail(line, 1, "description must be a quoted string");
        spec.description = v.text;
      } else if (key == "road") {
        expect_args(line, 0);
        spec.road = parse_road(line);
        have_road = true;
      } else if (key == "ego") {
        expect_args(line, 0);
        parse_ego(line, spec);
        have_ego = true;
      } else if (key == "expect") {
        expect_args(line, 0);
        spec.expected_outcome = parse_expect(line);
      } else {
        fail(line, 0, "unknown statement '" + key + "'");
      }
    }
    if (!seen.count("duration")) fail_end("missing 'duration'");
    if (!seen.count("description")) fail_end("missing 'description'");
    if (!have_road) fail_end("missing 'road' block");
    if (!have_ego) fail_end("missing 'ego' block");
    validate(spec);
    return spec;
  }

 private:
  bool at_end() const { return pos_ >= lines_.size(); }
  const Line& next() { return lines_[pos_++]; }

  [[noreturn]] void fail(const Line& line, std::size_t token, const std::string& msg) const {
    const int col = token < line.tokens.size() ? line.tokens[token].column
                                               : line.tokens.back().column +
                                                     static_cast<int>(line.tokens.back().text.size());
    throw ScenarioSyntaxError(line.number, col, msg);
  }
  [[noreturn]] void fail_end(const std::string& msg) const {
    throw ScenarioSyntaxError(last_line_, 1, msg);
  }

  void once(std::set<std::string>& seen, const Line& line) const {
    if (!seen.insert(line.tokens[0].text).second) {
      fail(line, 0, "duplicate '" + line.tokens[0].text + "'");
    }
  }

  void expect_args(const Line& line, std::size_t n) const {
    if (line.tokens.size() < n + 1) fail(line, line.tokens.size(), "missing argument");
    if (line.tokens.size() > n + 1) fail(line, n + 1, "unexpected extra token");
  }

  const Token& single_arg_token(const Line& line) const {
    expect_args(line, 1);
    return line.tokens[1];
  }
  std::string single_arg(const Line& line) const { return single_arg_token(line).text; }

  double number(const Line& line, std::size_t idx) const {
    if (idx >= line.tokens.size()) fail(line, idx, "missing number");
    const auto& tok = line.tokens[idx];
    if (tok.quoted) fail(line, idx, "expected a number");
    try {
      return parse_double(tok.text);
    } catch (const std::invalid_argument&) {
      fail(line, idx, "expected a number, got '" + tok.text + "'");
    }
  }

  int integer(const Line& line, std::size_t idx) const {
    if (idx >= line.tokens.size()) fail(line, idx, "missing integer");
    const auto& tok = line.tokens[idx];
    try {
      if (tok.quoted) throw std::invalid_argument("quoted");
      return static_cast<int>(parse_int(tok.text));
    } catch (const std::invalid_argument&) {
      fail(line, idx, "expected an integer, got '" + tok.text + "'");
    }
  }

  // Calls body(line) for each statement until the matching 'end'.
  template <typename Body>
  void block(const Line& opener, Body&& body) {
    while (true) {
      if (at_end()) {
        fail_end("missing 'end' for block '" + opener.tokens[0].text + "' opened on line " +
                 std::to_string(opener.number));
      }
      const Line& line = next();
      if (line.tokens[0].text == "end") {
        expect_args(line, 0);
        return;
      }
      body(line);
    }
  }

  RoadSpec parse_road(const Line& opener) {
    RoadSpec road;
    road.oncoming_strip.reset();
    std::set<std::string> seen;
    block(opener, [&](const Line& line) {
      once(seen, line);
      const auto& key = line.tokens[0].text;
      if (key == "lane_count") {
        expect_args(line, 1);
        road.lane_count = integer(line, 1);
      } else if (key == "lane_width") {
        expect_args(line, 1);
        road.lane_width = number(line, 1);
      } else if (key == "length") {
        expect_args(line, 1);
        road.length = number(line, 1);
      } else if (key == "oncoming_strip") {
        expect_args(line, 2);
        road.oncoming_strip = OncomingStrip{number(line, 1), number(line, 2)};
      } else {
        fail(line, 0, "unknown road key '" + key + "'");
      }
    });
    for (const char* k : {"lane_count", "lane_width", "length"}) {
      if (!seen.count(k)) fail(opener, 0, std::string("road block is missing '") + k + "'");
    }
    return road;
  }

  void parse_ego(const Line& opener, ScenarioSpec& spec) {
    std::set<std::string> seen;
    block(opener, [&](const Line& line) {
      once(seen, line);
      const auto& key = line.tokens[0].text;
      expect_args(line, 1);
      if (key == "lane") spec.ego_lane = integer(line, 1);
      else if (key == "speed") spec.ego_speed = number(line, 1);
      else if (key == "start") spec.ego_start = number(line, 1);
      else if (key == "set_speed") spec.set_speed = number(line, 1);
      else fail(line, 0, "unknown ego key '" + key + "'");
    });
    for (const char* k : {"lane", "speed"}) {
      if (!seen.count(k)) fail(opener, 0, std::string("ego block is missing '") + k + "'");
    }
  }

  ExpectedOutcome parse_expect(const Line& opener) {
    ExpectedOutcome out;
    std::set<std::string> seen;
    block(opener, [&](const Line& line) {
      once(seen, line);
      const auto& key = line.tokens[0].text;
      if (key == "lane_change") {
        const auto v = single_arg(line);
        if (v == "required") out.lane_change_required = true;
        else if (v == "forbidden") out.lane_change_forbidden = true;
        else if (v != "free") fail(line, 1, "lane_change must be required, forbidden or free");
      } else if (key == "time_gap") {
        expect_args(line, 2);
        out.time_gap_range = std::pair{number(line, 1), number(line, 2)};
      } else if (key == "reach_set_speed") {
        const auto v = single_arg(line);
        if (v != "true" && v != "false") fail(line, 1, "expected true or false");
        out.reach_set_speed = v == "true";
      } else {
        fail(line, 0, "unknown expect key '" + key + "'");
      }
    });
    return out;
  }

  AgentScript parse_agent(const Line& opener) {
    AgentScript agent;
    agent.name = single_arg(opener);
    std::set<std::string> seen;
    bool have_phases = false;
    block(opener, [&](const Line& line) {
      once(seen, line);
      const auto& key = line.tokens[0].text;
      if (key == "phases") {
        expect_args(line, 0);
        agent.phases = parse_phases(line);
        have_phases = true;
        return;
      }
      expect_args(line, 1);
      if (key == "lane") agent.initial_lane = integer(line, 1);
      else if (key == "offset") agent.initial_offset = number(line, 1);
      else if (key == "speed") agent.initial_speed = number(line, 1);
      else if (key == "heading") agent.heading = integer(line, 1);
      else fail(line, 0, "unknown agent key '" + key + "'");
    });
    for (const char* k : {"lane", "offset", "speed"}) {
      if (!seen.count(k)) fail(opener, 0, std::string("agent block is missing '") + k + "'");
    }
    if (!have_phases) fail(opener, 0, "agent block is missing 'phases'");
    return agent;
  }

  std::vector<Phase> parse_phases(const Line& opener) {
    std::vector<Phase> phases;
    block(opener, [&](const Line& line) {
      const auto& key = line.tokens[0].text;
      if (key == "hold") {
        expect_args(line, 1);
        phases.emplace_back(phase::Hold{number(line, 1)});
      } else if (key == "cut_in") {
        expect_args(line, 2);
        phases.emplace_back(phase::CutIn{integer(line, 1), number(line, 2)});
      } else if (key == "decelerate") {
        expect_args(line, 2);
        phases.emplace_back(phase::Decelerate{number(line, 1), number(line, 2)});
      } else if (key == "match_speed") {
        expect_args(line, 0);
        phases.emplace_back(phase::MatchSpeed{});
      } else if (key == "static") {
        expect_args(line, 0);
        phases.emplace_back(phase::Static{});
      } else {
        fail(line, 0, "unknown phase '" + key + "'");
      }
    });
    return phases;
  }

  std::vector<Line> lines_;
  std::size_t pos_ = 0;
  int last_line_ = 1;
};

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

struct PhaseWriter {
  std::ostringstream& out;
  void operator()(const phase::Hold& p) const { out << "    hold " << format_roundtrip(p.duration) << '\n'; }
  void operator()(const phase::CutIn& p) const {
    out << "    cut_in " << p.target_lane << ' ' << format_roundtrip(p.duration) << '\n';
  }
  void operator()(const phase::Decelerate& p) const {
    out << "    decelerate " << format_roundtrip(p.rate) << ' ' << format_roundtrip(p.floor_speed)
        << '\n';
  }
  void operator()(const phase::MatchSpeed&) const { out << "    match_speed\n"; }
  void operator()(const phase::Static&) const { out << "    static\n"; }
};

}  // namespace

ScenarioSpec parse_scenario(std::string_view text) { return Parser(text).parse(); }

std::string serialize_scenario(const ScenarioSpec& spec) {
  std::ostringstream out;
  out << "scenario " << spec.id << '\n';
  out << "mode " << to_string(spec.mode) << '\n';
  out << "duration " << format_roundtrip(spec.duration) << '\n';
  out << "description " << quote(spec.description) << '\n';
  out << '\n' << "road\n";
  out << "  lane_count " << spec.road.lane_count << '\n';
  out << "  lane_width " << format_roundtrip(spec.road.lane_width) << '\n';
  out << "  length " << format_roundtrip(spec.road.length) << '\n';
  if (spec.road.oncoming_strip) {
    out << "  oncoming_strip " << format_roundtrip(spec.road.oncoming_strip->lat_min) << ' '
        << format_roundtrip(spec.road.oncoming_strip->lat_max) << '\n';
  }
  out << "end\n\n";
  out << "ego\n";
  out << "  lane " << spec.ego_lane << '\n';
  out << "  speed " << format_roundtrip(spec.ego_speed) << '\n';
  out << "  start " << format_roundtrip(spec.ego_start) << '\n';
  if (spec.set_speed) out << "  set_speed " << format_roundtrip(*spec.set_speed) << '\n';
  out << "end\n\n";
  const auto& exp = spec.expected_outcome;
  out << "expect\n";
  out << "  lane_change "
      << (exp.lane_change_required ? "required" : exp.lane_change_forbidden ? "forbidden" : "free")
      << '\n';
  if (exp.time_gap_range) {
    out << "  time_gap " << format_roundtrip(exp.time_gap_range->first) << ' '
        << format_roundtrip(exp.time_gap_range->second) << '\n';
  }
  if (exp.reach_set_speed) out << "  reach_set_speed true\n";
  out << "end\n";
  for (const auto& agent : spec.agents) {
    out << '\n' << "agent " << agent.name << '\n';
    out << "  lane " << agent.initial_lane << '\n';
    out << "  offset " << format_roundtrip(agent.initial_offset) << '\n';
    out << "  speed " << format_roundtrip(agent.initial_speed) << '\n';
    out << "  heading " << agent.heading << '\n';
    out << "  phases\n";
    for (const auto& ph : agent.phases) std::visit(PhaseWriter{out}, ph);
    out << "  end\n";
    out << "end\n";
  }
  return out.str();
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace simloop
