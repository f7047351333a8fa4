#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "geomatch/instance.hpp"

namespace geomatch {

struct ParseError {
    int line = 0;
    std::string message;
};

// Instance file: line 1 "d n", then n lines of A coordinates and n lines of
// B coordinates, d space-separated decimals each.
bool read_instance(std::istream& in, RawInstance& inst, ParseError& err);
void write_instance(std::ostream& out, const RawInstance& inst);

// Matching file: line 1 "cost <decimal>", then n lines "a_index b_index".
struct MatchingFile {
    double cost = 0.0;
    std::vector<std::pair<int, int>> pairs;
};
bool read_matching(std::istream& in, MatchingFile& mf, ParseError& err);
void write_matching(std::ostream& out, double cost, const std::vector<int>& match_a);

// Shortest round-trip decimal formatting (std::to_chars).
std::string format_double(double v);

}  // namespace geomatch
