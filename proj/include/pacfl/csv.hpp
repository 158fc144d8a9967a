#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pacfl {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);
std::string join_csv(std::span<const std::string> fields);

// One-line CSV of a flat vector: "v0,v1,...".
std::string vector_to_csv(std::span<const double> values);
std::vector<double> vector_from_csv(std::string_view line);

}  // namespace pacfl
