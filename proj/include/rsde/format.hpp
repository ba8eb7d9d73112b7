#pragma once

#include <cstdio>
#include <string>

namespace rsde {

/// Shortest-exact serialization used for every float in CSV output: 17
/// significant digits round-trip to the same double.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace rsde
