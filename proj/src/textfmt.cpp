#include "textfmt.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdint>
#include <cstdlib>

#include "mrsim/errors.hpp"

namespace mrsim::textfmt {

namespace {

std::string_view trim(std::string_view s, std::size_t& lead) {
    lead = 0;
    while (lead < s.size() && std::isspace(static_cast<unsigned char>(s[lead]))) ++lead;
    std::size_t end = s.size();
    while (end > lead && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(lead, end - lead);
}

}  // namespace

std::vector<Block> parse_blocks(std::string_view text) {
    std::vector<Block> blocks;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view raw = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::size_t lead = 0;
        std::string_view s = trim(raw, lead);
        if (s.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3)
                throw ParseError("malformed block header", line_no, static_cast<int>(lead) + 1);
            std::size_t l2 = 0;
            blocks.push_back({std::string(trim(s.substr(1, s.size() - 2), l2)), line_no, {}});
        } else {
            if (blocks.empty()) throw ParseError("entry outside of a block", line_no, static_cast<int>(lead) + 1);
            auto eq = s.find('=');
            if (eq == std::string_view::npos)
                throw ParseError("expected key = value", line_no, static_cast<int>(lead) + 1);
            std::size_t kl = 0, vl = 0;
            std::string_view key = trim(s.substr(0, eq), kl);
            std::string_view val = trim(s.substr(eq + 1), vl);
            if (key.empty()) throw ParseError("empty key", line_no, static_cast<int>(lead) + 1);
            if (val.empty()) throw ParseError("missing value for '" + std::string(key) + "'", line_no,
                                              static_cast<int>(lead + eq) + 2);
            blocks.back().entries.push_back({std::string(key), std::string(val), line_no,
                                             static_cast<int>(lead + kl) + 1,
                                             static_cast<int>(lead + eq + 1 + vl) + 1});
        }
        if (nl == text.size()) break;
    }
    return blocks;
}

double to_double(const std::string& s, int line, int col) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    while (end && *end && std::isspace(static_cast<unsigned char>(*end))) ++end;
    if (s.empty() || end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw ParseError("not a number: '" + s + "'", line, col);
    return v;
}

int to_int(const std::string& s, int line, int col) {
    errno = 0;
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || errno == ERANGE || v < INT32_MIN || v > INT32_MAX)
        throw ParseError("not an integer: '" + s + "'", line, col);
    return static_cast<int>(v);
}

Vec3 to_vec3(const std::string& s, int line, int col) {
    Vec3 out;
    std::size_t start = 0;
    for (int i = 0; i < 3; ++i) {
        std::size_t comma = s.find(',', start);
        if ((i < 2) != (comma != std::string::npos)) throw ParseError("expected three comma-separated values", line, col);
        std::string part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        std::size_t lead = 0;
        std::string t(trim(part, lead));
        out[i] = to_double(t, line, col + static_cast<int>(start + lead));
        start = comma + 1;
    }
    return out;
}

Options split_options(const Entry& e) {
    Options o;
    const std::string& v = e.value;
    std::size_t i = 0;
    bool first = true;
    while (i < v.size()) {
        while (i < v.size() && std::isspace(static_cast<unsigned char>(v[i]))) ++i;
        if (i >= v.size()) break;
        std::size_t j = i;
        while (j < v.size() && !std::isspace(static_cast<unsigned char>(v[j]))) ++j;
        std::string tok = v.substr(i, j - i);
        const int col = e.value_col + static_cast<int>(i);
        auto eq = tok.find('=');
        if (first && eq == std::string::npos) {
            o.head = tok;
        } else {
            if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
                throw ParseError("expected option key=value, got '" + tok + "'", e.line, col);
            o.opts.push_back({tok.substr(0, eq), tok.substr(eq + 1), e.line, col, col + static_cast<int>(eq) + 1});
        }
        first = false;
        i = j;
    }
    return o;
}

void unknown_key(const Entry& e, const std::vector<std::string>& known) {
    for (const auto& k : known) {
        auto us = k.find('_');
        // "duration" for "duration_s", "grad_x" for "grad_x_mT_per_m"
        while (us != std::string::npos) {
            if (k.compare(0, us, e.key) == 0 && us == e.key.size())
                throw UnitError("key '" + e.key + "' lacks its unit, expected '" + k + "'", e.line, e.key_col);
            us = k.find('_', us + 1);
        }
    }
    throw ParseError("unknown key '" + e.key + "'", e.line, e.key_col);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_vec3(const Vec3& v) {
    return format_double(v.x) + "," + format_double(v.y) + "," + format_double(v.z);
}

}  // namespace mrsim::textfmt
