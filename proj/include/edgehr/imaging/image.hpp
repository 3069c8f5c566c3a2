/**
 * @file image.hpp
 * @brief Decoded image buffers, region annotations and cropped patches.
 */

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace edgehr::imaging {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major 8-bit RGB image. Dimensions are at least 1x1.
class ImageBuffer {
public:
    ImageBuffer(int width, int height, Rgb fill = {});
    ImageBuffer(int width, int height, std::vector<Rgb> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }
    Rgb& at(int x, int y) { return pixels_[index(x, y)]; }

    const std::vector<Rgb>& pixels() const noexcept { return pixels_; }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<Rgb> pixels_;
};

enum class RegionClass : std::uint8_t { nail = 0, skin = 1, reference = 2 };

std::string_view to_string(RegionClass region) noexcept;

/// YOLO-style box: center and size as fractions of the image dimensions.
struct BoundingBox {
    RegionClass region = RegionClass::nail;
    double cx = 0.5;
    double cy = 0.5;
    double w = 1.0;
    double h = 1.0;

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Pixel-space rectangle [x0, x1) x [y0, y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
};

struct RoiPatch {
    RegionClass region = RegionClass::nail;
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;
};

} // namespace edgehr::imaging
