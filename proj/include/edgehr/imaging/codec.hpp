#pragma once

#include "edgehr/imaging/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace edgehr::imaging {

/// Decodes binary PPM (P6, maxval 255), PNG or JPEG by sniffing the header.
ImageBuffer decode_image(std::span<const std::uint8_t> bytes);

ImageBuffer load_image(const std::filesystem::path& path);

std::string encode_ppm(const ImageBuffer& image);

void save_ppm(const ImageBuffer& image, const std::filesystem::path& path);

} // namespace edgehr::imaging
