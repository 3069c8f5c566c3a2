#pragma once

#include "edgehr/imaging/image.hpp"

namespace edgehr::imaging {

struct Lab {
    double l = 0.0;
    double a = 0.0;
    double b = 0.0;
};

/// sRGB (8-bit, gamma encoded) -> linear -> XYZ (D65) -> CIELAB.
/// The white reference is the XYZ image of sRGB white, so (255,255,255)
/// lands on L* = 100, a* = b* = 0.
Lab rgb_to_lab(Rgb pixel) noexcept;

/// sRGB gamma decode of one 8-bit channel value, in [0, 1].
double srgb_to_linear(std::uint8_t channel) noexcept;

} // namespace edgehr::imaging
