#pragma once

#include "edgehr/imaging/image.hpp"

#include <span>

namespace edgehr::imaging {

/// Maps a normalized box onto pixel bounds: edges rounded half-up and
/// clamped to the image. Throws errc::degenerate when the result is empty.
PixelRect to_pixel_rect(const ImageBuffer& image, const BoundingBox& box);

RoiPatch crop_roi(const ImageBuffer& image, const BoundingBox& box);

/// Scales each channel by 255 / mean(channel over the pooled reference
/// boxes), rounding half-up and clamping to [0, 255]. Throws
/// errc::degenerate if any reference channel mean is zero.
ImageBuffer white_balance(const ImageBuffer& image, std::span<const BoundingBox> references);

inline ImageBuffer white_balance(const ImageBuffer& image, const BoundingBox& reference) {
    return white_balance(image, std::span<const BoundingBox>(&reference, 1));
}

} // namespace edgehr::imaging
