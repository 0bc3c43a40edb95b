#pragma once

// Persisted traces: one CSV row per vehicle per frame, plus a JSON-lines
// sidecar with the events. The first sidecar line carries trace metadata.

#include "simloop/sim.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace simloop {

inline constexpr std::string_view kTraceCsvHeader = "time,name,s,lat,speed,accel,heading,lane";

class TraceParseError : public std::runtime_error {
 public:
  /// `row` is 1-based and counts the header; 0 means the whole file.
  TraceParseError(std::string file, int row, const std::string& message);
  const std::string& file() const { return file_; }
  int row() const { return row_; }

 private:
  std::string file_;
  int row_;
};

std::string trace_to_csv(const SimTrace& trace);
std::string events_to_jsonl(const SimTrace& trace);

/// Inverse of trace_to_csv + events_to_jsonl; exact for traces written by them.
SimTrace trace_from_text(std::string_view csv, std::string_view events_jsonl);

/// Writes <dir>/<id>.csv and <dir>/<id>.events.jsonl; returns the CSV path.
std::filesystem::path save_trace(const SimTrace& trace, const std::filesystem::path& dir);

/// Reads a CSV and its sidecar (same stem, `.events.jsonl`).
SimTrace load_trace(const std::filesystem::path& csv_path);

std::filesystem::path events_path_for(const std::filesystem::path& csv_path);

}  // namespace simloop
