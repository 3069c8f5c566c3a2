/**
 * @file error.hpp
 * @brief Exception type shared by every edgehr module.
 *
 * Errors carry a coarse category so the service and CLI edges can map them
 * onto HTTP statuses and exit codes without string matching.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace edgehr {

enum class errc {
    parse,
    range,
    invalid_argument,
    degenerate,
    integrity,
    corruption,
    not_found,
    conflict,
    unauthenticated,
    unauthorized,
    convergence,
    unknown_version,
    undefined_metric,
    io,
    unavailable,
};

std::string_view to_string(errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

} // namespace edgehr
