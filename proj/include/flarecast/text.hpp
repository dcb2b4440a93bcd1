#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flarecast {

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Strict double parse of a full token; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view token);

/// Splits one CSV line on commas. No quoting; empty fields are kept.
/// A trailing '\r' (CRLF input) is stripped first.
std::vector<std::string> split_csv_line(std::string_view line);

std::vector<std::string> read_lines(const std::string& path);

}  // namespace flarecast
