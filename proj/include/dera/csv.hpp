#pragma once

#include <cstdio>
#include <string>
#include <string_view>

namespace dera {

/// RFC-4180 field quoting: quote when the field contains a comma, quote or
/// newline, doubling embedded quotes.
inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Shortest-round-trip-ish fixed formatting; deterministic across runs.
inline std::string fmt_double(double v, int significant = 17) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", significant, v);
    return buf;
}

} // namespace dera
