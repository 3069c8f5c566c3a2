#include "edgehr/imaging/codec.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/imaging/stage_error.hpp"

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

extern "C" {
#include <jpeglib.h>
}

namespace edgehr::imaging {

namespace {

[[noreturn]] void decode_fail(const std::string& what) { throw StageError(errc::parse, "decode", what); }

ImageBuffer decode_ppm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 2;
    auto skip_space = [&] {
        for (;;) {
            while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
                continue;
            }
            return;
        }
    };
    auto read_int = [&] {
        skip_space();
        long v = 0;
        const std::size_t start = pos;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1 << 20) decode_fail("PPM header value too large");
            ++pos;
        }
        if (pos == start) decode_fail("malformed PPM header");
        return static_cast<int>(v);
    };
    const int width = read_int();
    const int height = read_int();
    const int maxval = read_int();
    if (maxval != 255) decode_fail("only 8-bit PPM is supported");
    ++pos; // single whitespace before raster
    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
    if (width < 1 || height < 1 || pos + need > bytes.size()) decode_fail("truncated PPM raster");
    std::vector<Rgb> px(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = {bytes[pos + 3 * i], bytes[pos + 3 * i + 1], bytes[pos + 3 * i + 2]};
    }
    return ImageBuffer(width, height, std::move(px));
}

ImageBuffer decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        decode_fail(std::string("PNG: ") + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        decode_fail("PNG: " + msg);
    }
    const int w = static_cast<int>(image.width);
    const int h = static_cast<int>(image.height);
    std::vector<Rgb> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
    return ImageBuffer(w, h, std::move(px));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

ImageBuffer decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = jpeg_error_exit;
    std::vector<std::uint8_t> raw;
    int w = 0;
    int h = 0;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        decode_fail(std::string("JPEG: ") + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    raw.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = raw.data() + static_cast<std::size_t>(cinfo.output_scanline) * static_cast<std::size_t>(w) * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    std::vector<Rgb> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
    return ImageBuffer(w, h, std::move(px));
}

} // namespace

ImageBuffer decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
    if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
        return decode_png(bytes);
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return decode_jpeg(bytes);
    decode_fail("unrecognized image format (expected PPM, PNG or JPEG)");
}

ImageBuffer load_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw Error(errc::io, "cannot open image " + path.string() + ": not a file");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open image " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_image(bytes);
}

std::string encode_ppm(const ImageBuffer& image) {
    std::string out = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    out.reserve(out.size() + image.pixels().size() * 3);
    for (const Rgb& p : image.pixels()) {
        out.push_back(static_cast<char>(p.r));
        out.push_back(static_cast<char>(p.g));
        out.push_back(static_cast<char>(p.b));
    }
    return out;
}

void save_ppm(const ImageBuffer& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot write image " + path.string());
    const std::string bytes = encode_ppm(image);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace edgehr::imaging
