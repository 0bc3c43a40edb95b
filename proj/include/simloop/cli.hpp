#pragma once

#include <iosfwd>

namespace simloop {

/// Exit codes: 0 everything passed, 1 evaluated and failed, 2 usage or configuration error.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitUsage = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace simloop
