#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pgad::csv {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Strict parse; throws Error(Io) naming `what` on garbage.
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

/// Split on commas. No quoting: none of the library's files need it.
std::vector<std::string_view> split(std::string_view line);

/// Join `fields` with commas, no trailing newline.
std::string join(const std::vector<std::string>& fields);

}  // namespace pgad::csv
