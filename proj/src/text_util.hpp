#pragma once

// Small parsing helpers shared by the file readers.

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "qgcl/error.hpp"

namespace qgcl::detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline long long parse_int(std::string_view s, const std::string& what) {
    const std::string t = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw FormatError(what + ": '" + t + "' is not an integer");
    return v;
}

inline double parse_double(std::string_view s, const std::string& what) {
    const std::string t = trim(s);
    try {
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size()) throw FormatError(what + ": '" + t + "' is not a number");
        return v;
    } catch (const std::logic_error&) {
        throw FormatError(what + ": '" + t + "' is not a number");
    }
}

}  // namespace qgcl::detail
