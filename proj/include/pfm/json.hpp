#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

namespace pfm {

using Json = nlohmann::json;

// Integral doubles serialize as JSON integers so canonical output does not
// depend on whether a writer spelled "330" or "330.0".
inline Json num(double x) {
    if (std::isfinite(x) && x == std::floor(x) && std::fabs(x) < 9.0e15) {
        return Json(static_cast<std::int64_t>(x));
    }
    return Json(x);
}

/// Canonical text: sorted keys (nlohmann objects are ordered maps), compact.
inline std::string canonical(const Json& j) { return j.dump(); }

/// Canonical text with a trailing newline, as printed by the CLI and served over HTTP.
inline std::string canonical_line(const Json& j) { return j.dump() + "\n"; }

}  // namespace pfm
