// SPDX-License-Identifier: Apache-2.0
#pragma once

// Helpers for the line-oriented `key = value` text files (configs,
// coefficient files, presets).

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace bwlasso::text {

struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;  // 1-based
};

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

/// Splits `text` into entries. Blank lines and lines starting with '#' are
/// skipped; everything else must contain '='.
inline std::vector<Entry> parse_entries(const std::string& text, const std::string& source) {
    std::vector<Entry> out;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw FormatError(source + ": line " + std::to_string(line_no) + ": expected 'key = value'");
        Entry e;
        e.key = std::string(trim(line.substr(0, eq)));
        e.value = std::string(trim(line.substr(eq + 1)));
        e.line = line_no;
        if (e.key.empty()) throw FormatError(source + ": line " + std::to_string(line_no) + ": empty key");
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string where(const std::string& source, const Entry& e) {
    return source + ": line " + std::to_string(e.line) + " ('" + e.key + "')";
}

inline double parse_double(const std::string& s, const std::string& context) {
    // strtod accepts hex floats and round-trips %.17g output exactly.
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (s.empty() || end != begin + s.size()) throw FormatError(context + ": not a number: '" + s + "'");
    return v;
}

template <typename Int>
Int parse_int(const std::string& s, const std::string& context) {
    Int v{};
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (!s.empty() && s.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (s.empty() || ec != std::errc{} || ptr != last) throw FormatError(context + ": not an integer: '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s, const std::string& context) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw FormatError(context + ": expected true/false, got '" + s + "'");
}

/// Round-trip exact: strtod(format_double(v)) == v for finite v.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& context) {
    std::vector<int> out;
    for (const auto& tok : split_ws(s)) out.push_back(parse_int<int>(tok, context));
    return out;
}

inline std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(v[i]);
    }
    return out;
}

/// 64-bit FNV-1a, used to tag output files with the config that produced
/// them.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace bwlasso::text
