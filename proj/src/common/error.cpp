#include "edgehr/common/error.hpp"

namespace edgehr {

std::string_view to_string(errc code) noexcept {
    switch (code) {
    case errc::parse: return "parse";
    case errc::range: return "range";
    case errc::invalid_argument: return "invalid_argument";
    case errc::degenerate: return "degenerate";
    case errc::integrity: return "integrity";
    case errc::corruption: return "corruption";
    case errc::not_found: return "not_found";
    case errc::conflict: return "conflict";
    case errc::unauthenticated: return "unauthenticated";
    case errc::unauthorized: return "unauthorized";
    case errc::convergence: return "convergence";
    case errc::unknown_version: return "unknown_version";
    case errc::undefined_metric: return "undefined_metric";
    case errc::io: return "io";
    case errc::unavailable: return "unavailable";
    }
    return "unknown";
}

} // namespace edgehr
