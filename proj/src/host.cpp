#include "simloop/host.hpp"

#include "simloop/protocol.hpp"

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace simloop {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::atomic<int> g_live_children{0};

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { std::signal(SIGPIPE, SIG_IGN); });
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "simloop-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
      throw HostError(std::string("mkdtemp failed: ") + std::strerror(errno));
    }
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

struct Pipe {
  Fd read;
  Fd write;
  static Pipe make() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) throw HostError(std::string("pipe failed: ") + std::strerror(errno));
    return Pipe{Fd(fds[0]), Fd(fds[1])};
  }
};

enum class ReadResult { kLine, kEof, kTimeout };

class ChildProcess {
 public:
  ChildProcess(const std::vector<std::string>& argv, std::size_t stderr_limit)
      : stderr_limit_(stderr_limit) {
    if (argv.empty()) throw HostError("empty shim command");
    Pipe in = Pipe::make();
    Pipe out = Pipe::make();
    Pipe err = Pipe::make();
    Pipe exec_status = Pipe::make();

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_ = ::fork();
    if (pid_ < 0) throw HostError(std::string("fork failed: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::setpgid(0, 0);
      ::dup2(in.read.get(), STDIN_FILENO);
      ::dup2(out.write.get(), STDOUT_FILENO);
      ::dup2(err.write.get(), STDERR_FILENO);
      ::execvp(args[0], args.data());
      const int code = errno;
      [[maybe_unused]] auto n = ::write(exec_status.write.get(), &code, sizeof code);
      ::_exit(127);
    }
    ++g_live_children;
    exec_status.write.reset();
    int code = 0;
    ssize_t n;
    do {
      n = ::read(exec_status.read.get(), &code, sizeof code);
    } while (n < 0 && errno == EINTR);
    if (n == static_cast<ssize_t>(sizeof code)) {
      reap(true);
      throw HostError("cannot start shim '" + argv[0] + "': " + std::strerror(code));
    }
    stdin_ = std::move(in.write);
    stdout_ = std::move(out.read);
    stderr_ = std::move(err.read);
  }

  ~ChildProcess() { reap(true); }
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  bool write_all(std::string_view data) {
    if (stdin_.get() < 0) return false;
    while (!data.empty()) {
      const ssize_t n = ::write(stdin_.get(), data.data(), data.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  }

  ReadResult read_line(std::string& line, Clock::time_point deadline) {
    while (true) {
      const auto nl = stdout_buf_.find('\n');
      if (nl != std::string::npos) {
        line = stdout_buf_.substr(0, nl);
        stdout_buf_.erase(0, nl + 1);
        return ReadResult::kLine;
      }
      if (stdout_eof_) return ReadResult::kEof;

      const auto now = Clock::now();
      if (now >= deadline) return ReadResult::kTimeout;
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);

      pollfd fds[2] = {{stdout_.get(), POLLIN, 0}, {stderr_.get(), POLLIN, 0}};
      const nfds_t count = stderr_.get() >= 0 ? 2 : 1;
      const int rc = ::poll(fds, count, static_cast<int>(wait.count()) + 1);
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw HostError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (count == 2 && (fds[1].revents & (POLLIN | POLLHUP))) drain_stderr();
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char buf[4096];
        const ssize_t n = ::read(stdout_.get(), buf, sizeof buf);
        if (n > 0) stdout_buf_.append(buf, static_cast<std::size_t>(n));
        else if (n == 0 || errno != EINTR) stdout_eof_ = true;
      }
    }
  }

  /// Waits up to `grace` for a voluntary exit, then kills. Always reaps.
  void stop(std::chrono::milliseconds grace) {
    stdin_.reset();
    const auto deadline = Clock::now() + grace;
    while (pid_ > 0 && Clock::now() < deadline) {
      int status = 0;
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        pid_ = -1;
        --g_live_children;
        break;
      }
      ::usleep(2000);
    }
    reap(true);
  }

  void kill() { reap(true); }

  std::string stderr_text() {
    if (stderr_.get() >= 0) {
      pollfd fd{stderr_.get(), POLLIN, 0};
      while (::poll(&fd, 1, 0) > 0 && (fd.revents & (POLLIN | POLLHUP))) {
        if (!drain_stderr()) break;
      }
    }
    return stderr_buf_;
  }

 private:
  // Returns false at EOF.
  bool drain_stderr() {
    char buf[4096];
    const ssize_t n = ::read(stderr_.get(), buf, sizeof buf);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) return true;
      stderr_.reset();
      return false;
    }
    if (stderr_buf_.size() < stderr_limit_) {
      stderr_buf_.append(buf, std::min(static_cast<std::size_t>(n), stderr_limit_ - stderr_buf_.size()));
    }
    return true;
  }

  void reap(bool force) {
    if (pid_ <= 0) return;
    if (force) {
      ::kill(-pid_, SIGKILL);
      ::kill(pid_, SIGKILL);
    }
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
    --g_live_children;
  }

  pid_t pid_ = -1;
  Fd stdin_;
  Fd stdout_;
  Fd stderr_;
  std::string stdout_buf_;
  std::string stderr_buf_;
  bool stdout_eof_ = false;
  std::size_t stderr_limit_;
};

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string with_stderr(std::string message, ChildProcess& child) {
  const auto err = trim(child.stderr_text());
  if (!err.empty()) message += ": " + err;
  return message;
}

std::optional<int> tick_of(const nlohmann::json& msg) {
  auto it = msg.find("tick");
  if (it != msg.end() && it->is_number_integer()) return it->get<int>();
  return std::nullopt;
}

std::string message_of(const nlohmann::json& msg) {
  auto it = msg.find("message");
  if (it != msg.end() && it->is_string()) return it->get<std::string>();
  return "controller reported an error";
}

class ProcessController : public Controller {
 public:
  ProcessController(std::unique_ptr<TempDir> dir, std::unique_ptr<ChildProcess> child,
                    const RuntimeConfig& config)
      : dir_(std::move(dir)), child_(std::move(child)), config_(config) {}

  ~ProcessController() override {
    if (child_) child_->kill();
  }

  ControlAction tick(const Observation& obs) override {
    if (!child_) throw ControllerFailure(ExecutabilityStatus::runtime("controller already stopped", obs.tick));
    if (!child_->write_all(protocol::encode_observe(obs))) {
      fail(ExecutabilityStatus::runtime(with_stderr("controller process is gone", *child_), obs.tick));
    }
    std::string line;
    switch (child_->read_line(line, Clock::now() + config_.tick_timeout)) {
      case ReadResult::kTimeout:
        fail(ExecutabilityStatus::timeout(obs.tick));
      case ReadResult::kEof:
        fail(ExecutabilityStatus::runtime(with_stderr("controller exited without replying", *child_),
                                          obs.tick));
      case ReadResult::kLine:
        break;
    }
    try {
      const auto msg = protocol::parse_line(line);
      const auto type = protocol::message_type(msg);
      if (type == "error") {
        fail(ExecutabilityStatus::runtime(message_of(msg), tick_of(msg).value_or(obs.tick)));
      }
      if (type != "act") throw protocol::MalformedMessage("unexpected message type '" + type + "'");
      return protocol::decode_act(msg);
    } catch (const protocol::MalformedMessage& e) {
      fail(ExecutabilityStatus::runtime(std::string("malformed reply: ") + e.what(), obs.tick));
    }
  }

  void finish() override {
    if (!child_) return;
    child_->write_all(protocol::encode_end());
    child_->stop(std::chrono::milliseconds(500));
    child_.reset();
  }

 private:
  [[noreturn]] void fail(ExecutabilityStatus status) {
    child_->kill();
    child_.reset();
    throw ControllerFailure(std::move(status));
  }

  std::unique_ptr<TempDir> dir_;
  std::unique_ptr<ChildProcess> child_;
  RuntimeConfig config_;
};

}  // namespace

int live_child_count() { return g_live_children.load(); }

ProcessRuntime::ProcessRuntime(RuntimeConfig config) : config_(std::move(config)) {
  ignore_sigpipe_once();
}

std::unique_ptr<Controller> ProcessRuntime::spawn(const std::string& code, const InitMessage& init) {
  if (trim(code).empty()) throw ControllerFailure(ExecutabilityStatus::no_code());

  auto dir = std::make_unique<TempDir>();
  const auto source = dir->path() / ("candidate" + config_.source_suffix);
  {
    std::ofstream out(source, std::ios::binary);
    out << code;
    if (!out) throw HostError("cannot write candidate source to " + source.string());
  }

  auto argv = config_.shim_command;
  argv.push_back(source.string());
  auto child = std::make_unique<ChildProcess>(argv, config_.stderr_limit);

  auto fail = [&](ExecutabilityStatus status) {
    child->kill();
    throw ControllerFailure(std::move(status));
  };

  if (!child->write_all(protocol::encode_init(init))) {
    child->stop(std::chrono::milliseconds(200));
    fail(ExecutabilityStatus::syntax(with_stderr("controller exited during start-up", *child)));
  }
  std::string line;
  switch (child->read_line(line, Clock::now() + config_.handshake_timeout)) {
    case ReadResult::kTimeout:
      fail(ExecutabilityStatus::timeout());
      break;
    case ReadResult::kEof:
      fail(ExecutabilityStatus::syntax(with_stderr("controller exited during start-up", *child)));
      break;
    case ReadResult::kLine:
      break;
  }
  try {
    const auto msg = protocol::parse_line(line);
    const auto type = protocol::message_type(msg);
    if (type == "error") {
      auto kind = msg.value("kind", std::string("syntax"));
      if (kind == "runtime") fail(ExecutabilityStatus::runtime(message_of(msg)));
      fail(ExecutabilityStatus::syntax(message_of(msg)));
    }
    if (type != "ready") throw protocol::MalformedMessage("expected 'ready', got '" + type + "'");
  } catch (const protocol::MalformedMessage& e) {
    fail(ExecutabilityStatus::runtime(std::string("malformed handshake: ") + e.what()));
  }
  return std::make_unique<ProcessController>(std::move(dir), std::move(child), config_);
}

}  // namespace simloop
