#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace curvens {

/// Shortest-safe round-trip representation ("%.17g"); NaN renders as "NA".
std::string format_double(double x);

/// Parses format_double output ("NA" -> NaN). Throws on garbage.
double parse_double(std::string_view s);

std::string csv_field(std::string_view s);

/// Splits CSV text into records (RFC 4180 quoting, "\n" or "\r\n" line ends).
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

}  // namespace curvens
