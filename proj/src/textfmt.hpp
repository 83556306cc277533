#pragma once

// Line-oriented block format shared by the sequence, object and system files:
//   [block]
//   key = value   # comment

#include <string>
#include <string_view>
#include <vector>

#include "mrsim/vec3.hpp"

namespace mrsim::textfmt {

struct Entry {
    std::string key;
    std::string value;
    int line = 0;
    int key_col = 0;
    int value_col = 0;
};

struct Block {
    std::string name;
    int line = 0;
    std::vector<Entry> entries;
};

std::vector<Block> parse_blocks(std::string_view text);

double to_double(const std::string& s, int line, int col);
int to_int(const std::string& s, int line, int col);
// "x,y,z"
Vec3 to_vec3(const std::string& s, int line, int col);

// Splits "word a=1 b=2" into the leading word and key=value options.
struct Options {
    std::string head;
    std::vector<Entry> opts;
};
Options split_options(const Entry& e);

// Throws UnitError if key looks like a known key without its unit suffix, else ParseError.
[[noreturn]] void unknown_key(const Entry& e, const std::vector<std::string>& known);

std::string format_double(double v);
std::string format_vec3(const Vec3& v);

}  // namespace mrsim::textfmt
