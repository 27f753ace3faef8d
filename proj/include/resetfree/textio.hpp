#pragma once

#include <charconv>
#include <string>

namespace resetfree {

// Shortest round-trip decimal form of a double, locale independent, so that
// repeated runs emit byte-identical text.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

} // namespace resetfree
