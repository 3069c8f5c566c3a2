#include "edgehr/imaging/image.hpp"

#include "edgehr/common/error.hpp"

#include <string>

namespace edgehr::imaging {

namespace {

void check_dimensions(int width, int height) {
    if (width < 1 || height < 1) {
        throw Error(errc::invalid_argument,
                    "image dimensions must be positive, got " + std::to_string(width) + "x" +
                        std::to_string(height));
    }
}

} // namespace

ImageBuffer::ImageBuffer(int width, int height, Rgb fill) : width_(width), height_(height) {
    check_dimensions(width, height);
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

ImageBuffer::ImageBuffer(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    check_dimensions(width, height);
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(errc::invalid_argument, "pixel count does not match image dimensions");
    }
}

std::string_view to_string(RegionClass region) noexcept {
    switch (region) {
    case RegionClass::nail: return "nail";
    case RegionClass::skin: return "skin";
    case RegionClass::reference: return "reference";
    }
    return "unknown";
}

} // namespace edgehr::imaging
