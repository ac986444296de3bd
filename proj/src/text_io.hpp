#pragma once

// Shortest round-trip text encoding for doubles and small line parsing helpers
// shared by the checkpoint, dataset and config readers.

#include <charconv>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "betak/errors.hpp"

namespace betak::detail {

inline void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

inline double parse_double(std::string_view tok, std::string_view context) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw IoError(std::string(context) + ": cannot parse number '" + std::string(tok) + "'");
    }
    return v;
}

inline std::uint64_t parse_uint(std::string_view tok, std::string_view context) {
    std::uint64_t v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw IoError(std::string(context) + ": cannot parse integer '" + std::string(tok) + "'");
    }
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::string next_line(std::istream& in, std::string_view context) {
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(std::string(context) + ": unexpected end of file");
    }
    return line;
}

}  // namespace betak::detail
