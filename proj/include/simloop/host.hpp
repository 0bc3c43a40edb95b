#pragma once

// Runs candidate controllers as child processes speaking the tick protocol.

#include "simloop/controller.hpp"

#include <chrono>
#include <string>
#include <vector>

namespace simloop {

struct RuntimeConfig {
  /// argv prefix; the candidate source path is appended.
  std::vector<std::string> shim_command{"simloop-shim"};
  /// Extension given to the temporary source file handed to the shim.
  std::string source_suffix = ".py";
  std::chrono::milliseconds handshake_timeout{5000};
  std::chrono::milliseconds tick_timeout{1000};
  /// Cap on retained child stderr, bytes.
  std::size_t stderr_limit = 64 * 1024;
};

/// The shim could not be started at all (missing executable, fork failure).
/// This is a host problem, not a property of the candidate.
class HostError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProcessRuntime : public ControllerRuntime {
 public:
  explicit ProcessRuntime(RuntimeConfig config);

  /// Writes `code` to a private temp file, starts the shim and completes the
  /// init/ready handshake. Throws ControllerFailure or HostError.
  std::unique_ptr<Controller> spawn(const std::string& code, const InitMessage& init) override;

  const RuntimeConfig& config() const { return config_; }

 private:
  RuntimeConfig config_;
};

/// Number of child processes started by this process that have not been reaped.
int live_child_count();

}  // namespace simloop
