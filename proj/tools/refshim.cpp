// Protocol peer that runs reference directive programs.
// Usage: simloop-refshim <program-file>
// Speaks the same stdin/stdout line protocol as a real controller shim.

#include "simloop/protocol.hpp"
#include "simloop/reference.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace simloop;

namespace {

[[noreturn]] void hang() {
  while (true) std::this_thread::sleep_for(std::chrono::hours(1));
}

void send(const std::string& line) { std::cout << line << std::flush; }

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: simloop-refshim <program-file>\n";
    return 2;
  }
  std::ifstream in(argv[1], std::ios::binary);
  if (!in) {
    std::cerr << "cannot read " << argv[1] << "\n";
    return 2;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  std::optional<reference::Session> session;
  std::string line;
  while (std::getline(std::cin, line)) {
    nlohmann::json msg;
    std::string type;
    try {
      msg = protocol::parse_line(line);
      type = protocol::message_type(msg);
    } catch (const protocol::MalformedMessage& e) {
      std::cerr << "refshim: " << e.what() << "\n";
      return 3;
    }

    if (type == "init") {
      reference::Program program;
      try {
        program = reference::parse_program(buf.str());
      } catch (const reference::ProgramSyntaxError& e) {
        send(protocol::encode_error("syntax", e.what(), std::nullopt));
        return 1;
      }
      session.emplace(std::move(program), protocol::decode_init(msg));
      if (const auto* f = session->init_fault()) {
        switch (f->kind) {
          case reference::FaultKind::kHang: hang();
          case reference::FaultKind::kRuntime:
            send(protocol::encode_error("runtime", "injected failure during start-up", std::nullopt));
            return 1;
          case reference::FaultKind::kMalformed:
            send(std::string(reference::kMalformedLine) + "\n");
            break;
        }
        continue;
      }
      send(protocol::encode_ready());
    } else if (type == "observe") {
      if (!session) {
        std::cerr << "refshim: observe before init\n";
        return 3;
      }
      const auto obs = protocol::decode_observe(msg);
      const auto reply = session->step(obs);
      switch (reply.kind) {
        case reference::Reply::Kind::kAct: send(protocol::encode_act(reply.action)); break;
        case reference::Reply::Kind::kRuntimeError:
          std::cerr << "Traceback (most recent call last):\n  " << reply.message << "\n";
          send(protocol::encode_error("runtime", reply.message, obs.tick));
          return 1;
        case reference::Reply::Kind::kHang: hang();
        case reference::Reply::Kind::kMalformed:
          send(std::string(reference::kMalformedLine) + "\n");
          break;
      }
    } else if (type == "end") {
      return 0;
    } else {
      std::cerr << "refshim: unexpected message type " << type << "\n";
      return 3;
    }
  }
  return 0;
}
