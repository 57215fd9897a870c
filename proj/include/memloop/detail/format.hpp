#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>

namespace memloop::detail {

/// Scientific notation with 17 significant digits.  Locale independent and
/// exact under a parse/format round trip, so equal doubles always serialize
/// to equal bytes.
inline std::string format_double(double x) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::scientific, 16);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long x) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

/// Parse a whole field as a double.  Returns nullopt on trailing garbage or
/// empty input; inf/nan parse fine and are rejected by callers that require
/// finite values.
inline std::optional<double> parse_double(std::string_view s) {
    double out = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, out, std::chars_format::general);
    if (res.ec != std::errc{} || res.ptr != last || s.empty()) return std::nullopt;
    return out;
}

inline std::optional<long long> parse_int(std::string_view s) {
    long long out = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc{} || res.ptr != last || s.empty()) return std::nullopt;
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

}  // namespace memloop::detail
