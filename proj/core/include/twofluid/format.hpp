#pragma once

#include <charconv>
#include <string>

namespace twofluid {

// Shortest round-trip decimal representation. Used for every float the CLI
// emits so that identical configs produce byte-identical artifacts.
inline std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

} // namespace twofluid
