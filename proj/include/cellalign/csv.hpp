#pragma once

#include <string>
#include <vector>

namespace cellalign::csv {

// RFC 4180: quoted fields may contain commas, doubled quotes and newlines.
// parse() returns one vector of fields per record; a trailing newline does
// not produce an empty record.
std::vector<std::vector<std::string>> parse(const std::string& text);

std::vector<std::vector<std::string>> parse_file(const std::string& path);

// Quotes a field only when needed.
std::string escape(const std::string& field);

std::string join_row(const std::vector<std::string>& fields);

// Shortest round-trip formatting for doubles; deterministic across runs.
std::string format_double(double v);

}  // namespace cellalign::csv
