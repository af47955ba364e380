#pragma once

#include <charconv>
#include <string>

namespace lab {

// Shortest round-trip decimal, independent of the locale.
inline std::string fmt(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace lab
