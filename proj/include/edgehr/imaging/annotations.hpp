#pragma once

#include "edgehr/imaging/image.hpp"

#include <string_view>
#include <vector>

namespace edgehr::imaging {

/// Parses detector export lines `class_id cx cy w h` (0=nail, 1=skin,
/// 2=reference). Blank lines and `#` comments are skipped. Malformed lines
/// raise errc::parse and out-of-range values errc::range; both messages
/// carry the 1-based line number.
std::vector<BoundingBox> parse_annotations(std::string_view text);

std::string format_annotations(const std::vector<BoundingBox>& boxes);

} // namespace edgehr::imaging
