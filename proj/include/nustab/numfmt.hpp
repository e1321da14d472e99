#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace nustab {

/// Format a double with the given number of significant digits ("%.*g").
/// 17 digits round-trip any IEEE double exactly; CSV exports use 12.
inline std::string format_double(double x, int significant_digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, x);
    return std::string(buf);
}

/// FNV-1a 64-bit hash, hex-encoded. Used to fingerprint configs and
/// run manifests so outputs can cite their provenance.
inline std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace nustab
