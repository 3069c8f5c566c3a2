#include "edgehr/imaging/color.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>

namespace edgehr::imaging {

namespace {

// IEC 61966-2-1 linear sRGB -> XYZ (D65).
constexpr double kM[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

constexpr double kWhiteX = kM[0][0] + kM[0][1] + kM[0][2];
constexpr double kWhiteY = kM[1][0] + kM[1][1] + kM[1][2];
constexpr double kWhiteZ = kM[2][0] + kM[2][1] + kM[2][2];

constexpr double kDelta = 6.0 / 29.0;

// Cube root for the Lab domain. libm's cbrt dominated feature extraction.
// A table indexed by exponent and top mantissa bits seeds within about 1e-3
// over [2^-8, 2^2); two Halley steps then reach double precision. Inputs
// outside that band start from a coarser exponent-divided seed.
struct CbrtSeeds {
    static constexpr int kLowExp = 1023 - 8;
    static constexpr int kExps = 10;
    static constexpr int kMantBits = 6;
    std::array<double, kExps << kMantBits> seed{};
    CbrtSeeds() {
        for (int e = 0; e < kExps; ++e) {
            for (int m = 0; m < (1 << kMantBits); ++m) {
                const auto bits = (static_cast<std::uint64_t>(kLowExp + e) << 52) |
                                  ((static_cast<std::uint64_t>(m) << (52 - kMantBits)) | (1ULL << (51 - kMantBits)));
                seed[static_cast<std::size_t>((e << kMantBits) | m)] = std::cbrt(std::bit_cast<double>(bits));
            }
        }
    }
};

const CbrtSeeds kCbrtSeeds;

double fast_cbrt(double t) {
    const auto bits = std::bit_cast<std::uint64_t>(t);
    const auto idx = static_cast<std::int64_t>(bits >> (52 - CbrtSeeds::kMantBits)) -
                     (static_cast<std::int64_t>(CbrtSeeds::kLowExp) << CbrtSeeds::kMantBits);
    double y;
    int steps = 2;
    if (idx >= 0 && idx < static_cast<std::int64_t>(kCbrtSeeds.seed.size())) {
        y = kCbrtSeeds.seed[static_cast<std::size_t>(idx)];
    } else {
        y = std::bit_cast<double>(bits / 3 + 0x2A9F7893782DA1CEULL);
        steps = 3;
    }
    for (int i = 0; i < steps; ++i) {
        const double y3 = y * y * y;
        y *= (y3 + 2.0 * t) / (2.0 * y3 + t);
    }
    return y;
}

double lab_f(double t) {
    return t > kDelta * kDelta * kDelta ? fast_cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double decode(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

const std::array<double, 256> kLinear = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[static_cast<std::size_t>(i)] = decode(i / 255.0);
    return t;
}();

} // namespace

double srgb_to_linear(std::uint8_t channel) noexcept { return kLinear[channel]; }

Lab rgb_to_lab(Rgb pixel) noexcept {
    const auto& lin = kLinear;
    const double r = lin[pixel.r];
    const double g = lin[pixel.g];
    const double b = lin[pixel.b];

    const double x = (kM[0][0] * r + kM[0][1] * g + kM[0][2] * b) / kWhiteX;
    const double y = (kM[1][0] * r + kM[1][1] * g + kM[1][2] * b) / kWhiteY;
    const double z = (kM[2][0] * r + kM[2][1] * g + kM[2][2] * b) / kWhiteZ;

    const double fx = lab_f(x);
    const double fy = lab_f(y);
    const double fz = lab_f(z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

} // namespace edgehr::imaging
