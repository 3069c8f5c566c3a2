#include "edgehr/imaging/roi.hpp"

#include "edgehr/common/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace edgehr::imaging {

namespace {

// Half-up rounding. The epsilon absorbs representation error in products
// such as 0.3 * 10 so that exact halves stay halves.
int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5 + 1e-9)); }

std::uint8_t scale_channel(std::uint8_t v, double factor) {
    const double scaled = std::floor(static_cast<double>(v) * factor + 0.5 + 1e-9);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

} // namespace

PixelRect to_pixel_rect(const ImageBuffer& image, const BoundingBox& box) {
    const double w = image.width();
    const double h = image.height();
    PixelRect r;
    r.x0 = std::clamp(round_half_up((box.cx - box.w / 2.0) * w), 0, image.width());
    r.x1 = std::clamp(round_half_up((box.cx + box.w / 2.0) * w), 0, image.width());
    r.y0 = std::clamp(round_half_up((box.cy - box.h / 2.0) * h), 0, image.height());
    r.y1 = std::clamp(round_half_up((box.cy + box.h / 2.0) * h), 0, image.height());
    if (r.width() <= 0 || r.height() <= 0) {
        throw Error(errc::degenerate, std::string(to_string(box.region)) + " box rounds to zero area");
    }
    return r;
}

RoiPatch crop_roi(const ImageBuffer& image, const BoundingBox& box) {
    const PixelRect r = to_pixel_rect(image, box);
    RoiPatch patch;
    patch.region = box.region;
    patch.width = r.width();
    patch.height = r.height();
    patch.pixels.reserve(static_cast<std::size_t>(r.width()) * static_cast<std::size_t>(r.height()));
    for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) patch.pixels.push_back(image.at(x, y));
    }
    return patch;
}

ImageBuffer white_balance(const ImageBuffer& image, std::span<const BoundingBox> references) {
    if (references.empty()) throw Error(errc::invalid_argument, "white balance needs a reference region");

    std::array<double, 3> sums{};
    std::size_t count = 0;
    for (const auto& box : references) {
        const PixelRect r = to_pixel_rect(image, box);
        for (int y = r.y0; y < r.y1; ++y) {
            for (int x = r.x0; x < r.x1; ++x) {
                const Rgb p = image.at(x, y);
                sums[0] += p.r;
                sums[1] += p.g;
                sums[2] += p.b;
                ++count;
            }
        }
    }

    std::array<double, 3> factor{};
    for (std::size_t c = 0; c < 3; ++c) {
        const double mean = sums[c] / static_cast<double>(count);
        if (mean <= 0.0) throw Error(errc::degenerate, "reference channel mean is zero, cannot normalize");
        factor[c] = 255.0 / mean;
    }

    std::vector<Rgb> out;
    out.reserve(image.pixels().size());
    for (const Rgb& p : image.pixels()) {
        out.push_back({scale_channel(p.r, factor[0]), scale_channel(p.g, factor[1]), scale_channel(p.b, factor[2])});
    }
    return ImageBuffer(image.width(), image.height(), std::move(out));
}

} // namespace edgehr::imaging
