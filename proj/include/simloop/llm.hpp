#pragma once

// Prompt assembly, model gateways (HTTP chat completion or scripted mock) and
// code extraction from model replies.

#include "simloop/report.hpp"
#include "simloop/scenario.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace simloop {

enum class SectionLabel { kContext, kScenarioDescription, kLastVersionOfCode, kTestResults, kTaskDescription };
enum class PromptKind { kSpecification, kCorrection };

std::string_view to_string(SectionLabel label);
std::string_view to_string(PromptKind kind);

struct PromptSection {
  SectionLabel label;
  std::string text;
  bool operator==(const PromptSection&) const = default;
};

struct PromptBundle {
  PromptKind kind = PromptKind::kSpecification;
  std::vector<PromptSection> sections;

  /// "## <Label>\n<text>" blocks separated by blank lines.
  std::string rendered() const;
  bool operator==(const PromptBundle&) const = default;
};

class PromptError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

PromptBundle build_specification_prompt(const std::string& context, const std::string& task);

/// `scenario_descs` in catalog order, joined with blank lines.
PromptBundle build_correction_prompt(const std::string& context, const std::vector<std::string>& scenario_descs,
                                     const std::string& last_code, const TestReport& report,
                                     const std::string& task);

/// Built-in Context and Task Description texts (own reconstructions).
std::string default_context(FunctionMode mode);
std::string default_task(FunctionMode mode);

struct ModelConfig {
  /// Base address, e.g. "https://api.openai.com" or "http://localhost:8000".
  std::string endpoint;
  std::string chat_path = "/v1/chat/completions";
  std::string model;
  double temperature = 0.7;
  int max_tokens = 4096;
  /// Prompt estimate + max_tokens must fit in this many tokens.
  int context_window = 128000;
  double timeout_s = 120.0;
  int retries = 2;
  int retry_backoff_ms = 1000;
  /// Environment variable holding the bearer token; the key itself is never stored.
  std::string api_key_env = "OPENAI_API_KEY";
  /// Directory of numbered reply files; replaces the endpoint when set.
  std::string mock_playlist;

  /// Throws std::invalid_argument.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class TokenLimitExceeded : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// ceil(characters / 4).
int estimate_tokens(std::string_view text);

/// Throws TokenLimitExceeded if the prompt cannot fit together with the reply budget.
void check_token_budget(const PromptBundle& bundle, const ModelConfig& cfg);

class ModelGateway {
 public:
  virtual ~ModelGateway() = default;
  /// Returns the assistant text. Throws GatewayError.
  virtual std::string complete(const PromptBundle& bundle) = 0;
};

/// Replays reply files `<n>*.txt|.md` in numeric order. Thread-safe.
class MockPlaylistGateway : public ModelGateway {
 public:
  MockPlaylistGateway(const std::filesystem::path& dir, ModelConfig cfg);
  std::string complete(const PromptBundle& bundle) override;
  std::size_t remaining() const;

 private:
  ModelConfig cfg_;
  std::vector<std::filesystem::path> files_;
  std::size_t next_ = 0;
  mutable std::mutex mu_;
};

/// OpenAI-compatible chat completion over HTTP(S).
class HttpGateway : public ModelGateway {
 public:
  explicit HttpGateway(ModelConfig cfg);
  std::string complete(const PromptBundle& bundle) override;
  /// Requests sent so far, retries included.
  int attempts() const { return attempts_.load(); }

 private:
  ModelConfig cfg_;
  std::atomic<int> attempts_{0};
};

std::unique_ptr<ModelGateway> make_gateway(const ModelConfig& cfg);

/// Concatenated fenced code blocks; otherwise the whole reply if at least 80 %
/// of its non-blank lines look like code; otherwise nothing.
std::optional<std::string> extract_code(std::string_view reply);

/// The line classifier used by the fallback heuristic.
bool looks_like_code(std::string_view line);

}  // namespace simloop
