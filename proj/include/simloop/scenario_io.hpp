#pragma once

// Native scenario file format. See docs/scenario-format.md for the grammar.

#include "simloop/scenario.hpp"

#include <stdexcept>
#include <string>
#include <string_view>

namespace simloop {

class ScenarioSyntaxError : public std::runtime_error {
 public:
  ScenarioSyntaxError(int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Parses and validates. Throws ScenarioSyntaxError or ScenarioInvalid.
ScenarioSpec parse_scenario(std::string_view text);

/// Canonical text form; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const ScenarioSpec& spec);

ScenarioSpec load_scenario_file(const std::string& path);

}  // namespace simloop
