#pragma once

#include <string>

namespace fcox {

// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);

// Fixed notation with `digits` decimals, for human-facing tables.
std::string format_fixed(double value, int digits = 4);

// Inverse of format_number; throws DataError on malformed input.
double parse_double(const std::string& text);

}  // namespace fcox
