#include "simloop/llm.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace simloop {

namespace fs = std::filesystem;

std::string_view to_string(SectionLabel label) {
  switch (label) {
    case SectionLabel::kContext: return "Context";
    case SectionLabel::kScenarioDescription: return "Scenario Description";
    case SectionLabel::kLastVersionOfCode: return "Last Version of Code";
    case SectionLabel::kTestResults: return "Test Results";
    case SectionLabel::kTaskDescription: return "Task Description";
  }
  return "?";
}

std::string_view to_string(PromptKind kind) {
  return kind == PromptKind::kSpecification ? "Specification" : "Correction";
}

std::string PromptBundle::rendered() const {
  std::string out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i > 0) out += "\n";
    out += "## ";
    out += to_string(sections[i].label);
    out += "\n";
    out += sections[i].text;
    if (out.back() != '\n') out += "\n";
  }
  return out;
}

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

void require_text(const std::string& text, SectionLabel label) {
  if (blank(text)) throw PromptError(std::string(to_string(label)) + " section is empty");
}

}  // namespace

PromptBundle build_specification_prompt(const std::string& context, const std::string& task) {
  require_text(context, SectionLabel::kContext);
  require_text(task, SectionLabel::kTaskDescription);
  return {PromptKind::kSpecification,
          {{SectionLabel::kContext, context}, {SectionLabel::kTaskDescription, task}}};
}

PromptBundle build_correction_prompt(const std::string& context, const std::vector<std::string>& scenario_descs,
                                     const std::string& last_code, const TestReport& report,
                                     const std::string& task) {
  std::string scenarios;
  for (const auto& d : scenario_descs) {
    if (blank(d)) continue;
    if (!scenarios.empty()) scenarios += "\n\n";
    scenarios += d;
  }
  const std::string results = report.text();
  require_text(context, SectionLabel::kContext);
  require_text(scenarios, SectionLabel::kScenarioDescription);
  require_text(last_code, SectionLabel::kLastVersionOfCode);
  require_text(results, SectionLabel::kTestResults);
  require_text(task, SectionLabel::kTaskDescription);
  return {PromptKind::kCorrection,
          {{SectionLabel::kContext, context},
           {SectionLabel::kScenarioDescription, scenarios},
           {SectionLabel::kLastVersionOfCode, last_code},
           {SectionLabel::kTestResults, results},
           {SectionLabel::kTaskDescription, task}}};
}

std::string default_context(FunctionMode /*mode*/) {
  return R"(You write controller code for the ego vehicle of a highway driving simulator.
Use Python 3 and only the standard library.

Define a function `control(observation)`. The simulator calls it every 0.05 seconds
and expects a tuple `(accel, lane_change)`:
- `accel` is the requested longitudinal acceleration in m/s^2, limited to [-8, 8].
- `lane_change` is -1 to start a lane change to the left, +1 to the right, 0 to keep the lane.
  A lane change takes 2 seconds and cannot be interrupted.

`observation` is a dict:
- `observation["time"]`: simulation time in seconds.
- `observation["ego"]`: dict with `s` (position of the front bumper along the road, m),
  `lat` (lateral position of the vehicle centre, m, measured from the left road edge),
  `speed` (m/s), `lane` (current lane index), `lane_count` and `lane_width` (m).
- `observation["agents"]`: list of dicts, one per other vehicle, nearest first, with `name`,
  `s_relative` (front bumper relative to the ego front bumper, positive ahead), `lat`, `lane`,
  `speed` (m/s) and `heading` (1 for the same direction as the ego, -1 for oncoming traffic).

Lanes are numbered from 0 at the left road edge. All vehicles are 5 m long and 2 m wide.
Module-level variables may be used to keep state between calls within one test case.
Reply with the complete program in a single fenced code block.
)";
}

std::string default_task(FunctionMode mode) {
  if (mode == FunctionMode::kAcc) {
    return R"(Implement an Adaptive Cruise Control function.
The desired speed chosen by the driver is available as the global variable `SET_SPEED` (m/s).
- Without a vehicle ahead in the ego lane, accelerate or brake smoothly to the set speed.
- With a slower vehicle ahead in the ego lane, follow it and keep a time gap between 1 and
  3 seconds. The time gap is the distance from the ego front bumper to the rear bumper of the
  vehicle ahead, divided by the ego speed.
- Brake as hard as needed to avoid any collision, including when the vehicle ahead stops.
- Never change lanes: always return 0 for lane_change.
)";
  }
  return R"(Implement a Collision Avoidance by Evasive Manoeuvre function.
The ego vehicle drives at constant speed and cannot brake: the simulator ignores `accel`.
The only way to avoid a collision is a lane change.
- Watch the vehicle ahead in the ego lane. When a collision with it is imminent, change to an
  adjacent lane that is free.
- Prioritise lane changes to the left. Use the right lane only when the left lane is occupied
  or does not exist.
- A lane is free if no vehicle in it is alongside the ego or close ahead or behind, and no
  vehicle in it is approaching quickly.
- Never leave the road and never change lanes without an imminent collision.
Hint: the time to collision (TTC) is the distance from the ego front bumper to the rear bumper
of the vehicle ahead divided by the difference between the ego speed and the speed of that
vehicle. It is only defined while the ego is faster. The headway time is the same distance
divided by the ego speed.
)";
}

void ModelConfig::validate() const {
  if (endpoint.empty() == mock_playlist.empty()) {
    throw std::invalid_argument("model: exactly one of endpoint and mock_playlist must be set");
  }
  if (retries < 0) throw std::invalid_argument("model.retries must be >= 0");
  if (max_tokens <= 0) throw std::invalid_argument("model.max_tokens must be positive");
  if (context_window <= 0) throw std::invalid_argument("model.context_window must be positive");
  if (!(timeout_s > 0.0)) throw std::invalid_argument("model.timeout_s must be positive");
  if (retry_backoff_ms < 0) throw std::invalid_argument("model.retry_backoff_ms must be >= 0");
  if (!(temperature >= 0.0)) throw std::invalid_argument("model.temperature must be >= 0");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"endpoint", c.endpoint},
          {"chat_path", c.chat_path},
          {"model", c.model},
          {"temperature", c.temperature},
          {"max_tokens", c.max_tokens},
          {"context_window", c.context_window},
          {"timeout_s", c.timeout_s},
          {"retries", c.retries},
          {"retry_backoff_ms", c.retry_backoff_ms},
          {"api_key_env", c.api_key_env},
          {"mock_playlist", c.mock_playlist}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  static const char* const kKeys[] = {"endpoint",   "chat_path", "model",   "temperature",
                                      "max_tokens", "context_window", "timeout_s", "retries",
                                      "retry_backoff_ms", "api_key_env", "mock_playlist"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) ==
        std::end(kKeys)) {
      throw std::invalid_argument("model: unknown key '" + key + "'");
    }
  }
  ModelConfig c;
  c.endpoint = j.value("endpoint", c.endpoint);
  c.chat_path = j.value("chat_path", c.chat_path);
  c.model = j.value("model", c.model);
  c.temperature = j.value("temperature", c.temperature);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.context_window = j.value("context_window", c.context_window);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.retries = j.value("retries", c.retries);
  c.retry_backoff_ms = j.value("retry_backoff_ms", c.retry_backoff_ms);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.mock_playlist = j.value("mock_playlist", c.mock_playlist);
  return c;
}

int estimate_tokens(std::string_view text) { return static_cast<int>((text.size() + 3) / 4); }

void check_token_budget(const PromptBundle& bundle, const ModelConfig& cfg) {
  const int prompt = estimate_tokens(bundle.rendered());
  if (static_cast<long long>(prompt) + cfg.max_tokens > cfg.context_window) {
    throw TokenLimitExceeded("prompt of about " + std::to_string(prompt) + " tokens plus " +
                             std::to_string(cfg.max_tokens) + " reply tokens exceeds the context window of " +
                             std::to_string(cfg.context_window));
  }
}

// ---------------------------------------------------------------------------

namespace {

// Leading decimal number of a file name, or nullopt.
std::optional<long long> leading_number(const std::string& name) {
  std::size_t i = 0;
  while (i < name.size() && std::isdigit(static_cast<unsigned char>(name[i]))) ++i;
  if (i == 0 || i > 18) return std::nullopt;
  return std::stoll(name.substr(0, i));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw TransportError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

MockPlaylistGateway::MockPlaylistGateway(const fs::path& dir, ModelConfig cfg) : cfg_(std::move(cfg)) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("mock playlist is not a directory: " + dir.string());
  std::vector<std::pair<long long, fs::path>> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    const auto n = leading_number(name);
    if (!n) continue;
    entries.emplace_back(*n, e.path());
  }
  std::sort(entries.begin(), entries.end());
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].first == entries[i - 1].first) {
      throw std::invalid_argument("mock playlist has two replies numbered " + std::to_string(entries[i].first));
    }
  }
  for (auto& [_, p] : entries) files_.push_back(std::move(p));
}

std::string MockPlaylistGateway::complete(const PromptBundle& bundle) {
  check_token_budget(bundle, cfg_);
  fs::path file;
  {
    std::lock_guard lock(mu_);
    if (next_ >= files_.size()) throw TransportError("mock playlist exhausted");
    file = files_[next_++];
  }
  return read_file(file);
}

std::size_t MockPlaylistGateway::remaining() const {
  std::lock_guard lock(mu_);
  return files_.size() - next_;
}

HttpGateway::HttpGateway(ModelConfig cfg) : cfg_(std::move(cfg)) {}

std::string HttpGateway::complete(const PromptBundle& bundle) {
  check_token_budget(bundle, cfg_);

  nlohmann::json body = {{"model", cfg_.model},
                         {"messages", {{{"role", "user"}, {"content", bundle.rendered()}}}},
                         {"temperature", cfg_.temperature},
                         {"max_tokens", cfg_.max_tokens}};
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  httplib::Client client(cfg_.endpoint);
  if (!client.is_valid()) throw TransportError("unsupported endpoint: " + cfg_.endpoint);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(cfg_.timeout_s * 1000.0));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0 && cfg_.retry_backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.retry_backoff_ms * attempt));
    }
    ++attempts_;
    auto res = client.Post(cfg_.chat_path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (res->status != 200) {
      if (!reply.is_discarded() && reply.contains("error") && reply["error"].is_object() &&
          reply["error"].value("code", std::string()) == "context_length_exceeded") {
        throw TokenLimitExceeded(reply["error"].value("message", std::string("context length exceeded")));
      }
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
    }
    if (reply.is_discarded()) throw TransportError("reply is not JSON");
    try {
      const auto& choice = reply.at("choices").at(0);
      if (choice.value("finish_reason", std::string()) == "length") {
        throw TokenLimitExceeded("reply truncated at " + std::to_string(cfg_.max_tokens) + " tokens");
      }
      const auto& content = choice.at("message").at("content");
      return content.is_string() ? content.get<std::string>() : std::string();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("unexpected reply shape: ") + e.what());
    }
  }
  throw TransportError(last_error + " (after " + std::to_string(cfg_.retries + 1) + " attempts)");
}

std::unique_ptr<ModelGateway> make_gateway(const ModelConfig& cfg) {
  cfg.validate();
  if (!cfg.mock_playlist.empty()) return std::make_unique<MockPlaylistGateway>(cfg.mock_playlist, cfg);
  return std::make_unique<HttpGateway>(cfg);
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_fence(std::string_view line) { return trim(line).substr(0, 3) == "```"; }

constexpr std::string_view kCodeKeywords[] = {
    "def",  "class", "import", "from",   "return",  "if",   "elif",  "else:", "for",   "while",
    "try:", "except", "finally:", "with", "pass",   "global", "raise", "break", "continue", "lambda",
    "assert", "controller", "use", "fault", "}", "{", "#", "@"};

}  // namespace

bool looks_like_code(std::string_view line) {
  const auto t = trim(line);
  if (t.empty()) return false;
  const bool indented = line.front() == ' ' || line.front() == '\t';
  const bool has_operators = t.find_first_of("=()[]{}") != std::string_view::npos;
  const char last = t.back();
  // Prose: several words ending like a sentence, without code punctuation.
  if ((last == '.' || last == '!' || last == '?') && !has_operators) {
    if (std::count(t.begin(), t.end(), ' ') >= 3) return false;
  }
  if (indented || has_operators || last == ':') return true;
  const auto first = t.substr(0, t.find(' '));
  for (auto kw : kCodeKeywords) {
    if (first == kw || (kw.size() == 1 && first.substr(0, 1) == kw)) return true;
  }
  return false;
}

std::optional<std::string> extract_code(std::string_view reply) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    auto nl = reply.find('\n', pos);
    if (nl == std::string_view::npos) nl = reply.size();
    lines.push_back(reply.substr(pos, nl - pos));
    pos = nl + 1;
  }

  std::string code;
  bool any_fence = false;
  bool inside = false;
  std::string block;
  for (auto line : lines) {
    if (is_fence(line)) {
      if (inside) {
        if (!code.empty() && code.back() != '\n') code += '\n';
        code += block;
        block.clear();
      }
      inside = !inside;
      any_fence = true;
      continue;
    }
    if (inside) {
      block += std::string(line);
      block += '\n';
    }
  }
  if (inside) code += block;  // unterminated final block
  if (any_fence) {
    if (blank(code)) return std::nullopt;
    return code;
  }

  int nonblank = 0;
  int codeish = 0;
  for (auto line : lines) {
    if (trim(line).empty()) continue;
    ++nonblank;
    if (looks_like_code(line)) ++codeish;
  }
  if (nonblank == 0 || codeish * 5 < nonblank * 4) return std::nullopt;
  return std::string(reply);
}

}  // namespace simloop
