#pragma once

#include <string>
#include <string_view>

namespace simloop {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_roundtrip(double value);

/// Fixed-point text with `decimals` digits, rounding half away from zero on the
/// shortest decimal representation of `value` (so 5.05 -> "5.1" at one decimal).
std::string format_fixed(double value, int decimals);

/// Strict full-string double parse; throws std::invalid_argument on trailing junk.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

}  // namespace simloop
