/**
 * @file time.hpp
 * @brief UTC timestamps as milliseconds since the Unix epoch, with a fixed
 * ISO 8601 text form `YYYY-MM-DDTHH:MM:SS.sssZ`.
 */

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace edgehr {

std::int64_t now_ms();

std::string format_timestamp(std::int64_t ms);

/// Accepts `YYYY-MM-DDTHH:MM:SSZ` with optional `.s` to `.sss` fraction.
/// Throws errc::parse on anything else, including impossible dates.
std::int64_t parse_timestamp(std::string_view text);

/// `YYYY-MM-DD` to days since 1970-01-01; errc::parse on bad input.
std::int64_t parse_date(std::string_view text);
std::string format_date(std::int64_t days);

inline std::int64_t days_of(std::int64_t ms) {
    return ms >= 0 ? ms / 86'400'000 : -((-ms + 86'399'999) / 86'400'000);
}

} // namespace edgehr
