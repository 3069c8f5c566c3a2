#include "doctest.h"

#include "../support/lab_oracle.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/rng.hpp"
#include "edgehr/imaging/annotations.hpp"
#include "edgehr/imaging/codec.hpp"
#include "edgehr/imaging/color.hpp"
#include "edgehr/imaging/features.hpp"
#include "edgehr/imaging/roi.hpp"
#include "edgehr/imaging/stage_error.hpp"

#include <algorithm>
#include <cmath>

using namespace edgehr;
using namespace edgehr::imaging;

namespace {

ImageBuffer random_image(Rng& rng, int w, int h) {
    ImageBuffer img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = {static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                            static_cast<std::uint8_t>(rng.below(256))};
    return img;
}

errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an edgehr::Error");
    return errc::io;
}

} // namespace

TEST_CASE("parse_annotations maps fields and preserves order") {
    auto one = parse_annotations("0 0.5 0.5 0.2 0.1");
    REQUIRE(one.size() == 1);
    CHECK(one[0] == BoundingBox{RegionClass::nail, 0.5, 0.5, 0.2, 0.1});

    CHECK(parse_annotations("").empty());

    auto two = parse_annotations("2 0.1 0.1 0.05 0.05\n1 0.6 0.6 0.3 0.3");
    REQUIRE(two.size() == 2);
    CHECK(two[0] == BoundingBox{RegionClass::reference, 0.1, 0.1, 0.05, 0.05});
    CHECK(two[1] == BoundingBox{RegionClass::skin, 0.6, 0.6, 0.3, 0.3});

    CHECK(parse_annotations("# detector v3\n\n0 0.5 0.5 0.2 0.1  # left index\r\n").size() == 1);
}

TEST_CASE("parse_annotations reports line numbers") {
    try {
        parse_annotations("0 0.5 0.5 0.2 0.1\n0 0.5 zz 0.2 0.1\n");
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK(code_of([] { parse_annotations("0 0.5 0.5 0.2"); }) == errc::parse);
    CHECK(code_of([] { parse_annotations("0 1.5 0.5 0.2 0.1"); }) == errc::range);
    CHECK(code_of([] { parse_annotations("3 0.5 0.5 0.2 0.1"); }) == errc::range);
    CHECK(code_of([] { parse_annotations("0 0.5 0.5 0 0.1"); }) == errc::range);
}

TEST_CASE("crop_roi") {
    Rng rng(7);
    const ImageBuffer img = random_image(rng, 4, 4);

    SUBCASE("full-image box is the identity") {
        const RoiPatch p = crop_roi(img, {RegionClass::nail, 0.5, 0.5, 1.0, 1.0});
        CHECK(p.width == 4);
        CHECK(p.height == 4);
        CHECK(p.pixels == img.pixels());
    }
    SUBCASE("quadrant box yields the top-left 2x2") {
        const RoiPatch p = crop_roi(img, {RegionClass::skin, 0.25, 0.25, 0.5, 0.5});
        REQUIRE(p.pixels.size() == 4);
        CHECK(p.region == RegionClass::skin);
        CHECK(p.pixels[0] == img.at(0, 0));
        CHECK(p.pixels[1] == img.at(1, 0));
        CHECK(p.pixels[2] == img.at(0, 1));
        CHECK(p.pixels[3] == img.at(1, 1));
    }
    SUBCASE("degenerate box") {
        const ImageBuffer small(2, 2);
        CHECK(code_of([&] { crop_roi(small, {RegionClass::nail, 0.5, 0.5, 0.1, 0.5}); }) == errc::degenerate);
    }
    SUBCASE("boxes past the border are clamped") {
        const RoiPatch p = crop_roi(img, {RegionClass::nail, 1.0, 1.0, 1.0, 1.0});
        CHECK(p.width == 2);
        CHECK(p.height == 2);
        CHECK(p.pixels[0] == img.at(2, 2));
    }
    SUBCASE("full-image identity holds for random sizes") {
        for (int i = 0; i < 20; ++i) {
            const int w = 1 + static_cast<int>(rng.below(40));
            const int h = 1 + static_cast<int>(rng.below(40));
            const ImageBuffer im = random_image(rng, w, h);
            CHECK(crop_roi(im, {RegionClass::nail, 0.5, 0.5, 1.0, 1.0}).pixels == im.pixels());
        }
    }
}

TEST_CASE("white_balance") {
    const BoundingBox whole{RegionClass::reference, 0.5, 0.5, 1.0, 1.0};

    SUBCASE("pure white reference leaves the image unchanged") {
        Rng rng(3);
        ImageBuffer img = random_image(rng, 8, 8);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) img.at(x, y) = {255, 255, 255};
        CHECK(white_balance(img, BoundingBox{RegionClass::reference, 0.25, 0.25, 0.5, 0.5}) == img);
    }
    SUBCASE("uniform image against itself becomes white") {
        const ImageBuffer img(5, 3, Rgb{100, 200, 50});
        CHECK(white_balance(img, whole) == ImageBuffer(5, 3, Rgb{255, 255, 255}));
    }
    SUBCASE("half-up rounding of 64 * 255 / 128") {
        ImageBuffer img(2, 1, Rgb{128, 128, 128});
        img.at(1, 0) = {64, 64, 64};
        const ImageBuffer out = white_balance(img, BoundingBox{RegionClass::reference, 0.25, 0.5, 0.5, 1.0});
        CHECK(out.at(1, 0) == Rgb{128, 128, 128});
        CHECK(out.at(0, 0) == Rgb{255, 255, 255});
    }
    SUBCASE("zero reference mean is rejected") {
        ImageBuffer img(2, 2, Rgb{0, 10, 10});
        CHECK(code_of([&] { white_balance(img, whole); }) == errc::degenerate);
    }
    SUBCASE("pooled reference boxes") {
        ImageBuffer img(4, 1, Rgb{10, 10, 10});
        img.at(0, 0) = {100, 100, 100};
        img.at(3, 0) = {200, 200, 200};
        const BoundingBox refs[] = {{RegionClass::reference, 0.125, 0.5, 0.25, 1.0},
                                    {RegionClass::reference, 0.875, 0.5, 0.25, 1.0}};
        const ImageBuffer out = white_balance(img, refs);
        CHECK(out.at(0, 0) == Rgb{170, 170, 170});
        CHECK(out.at(3, 0) == Rgb{255, 255, 255});
    }
    SUBCASE("idempotent for uniform reference patches") {
        Rng rng(11);
        for (int i = 0; i < 50; ++i) {
            ImageBuffer img = random_image(rng, 12, 12);
            const Rgb ref{static_cast<std::uint8_t>(1 + rng.below(255)), static_cast<std::uint8_t>(1 + rng.below(255)),
                          static_cast<std::uint8_t>(1 + rng.below(255))};
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 3; ++x) img.at(x, y) = ref;
            const BoundingBox box{RegionClass::reference, 0.125, 0.125, 0.25, 0.25};
            const ImageBuffer once = white_balance(img, box);
            const ImageBuffer twice = white_balance(once, box);
            for (std::size_t k = 0; k < once.pixels().size(); ++k) {
                CHECK(std::abs(once.pixels()[k].r - twice.pixels()[k].r) <= 1);
                CHECK(std::abs(once.pixels()[k].g - twice.pixels()[k].g) <= 1);
                CHECK(std::abs(once.pixels()[k].b - twice.pixels()[k].b) <= 1);
            }
        }
    }
}

TEST_CASE("rgb_to_lab") {
    const Lab white = rgb_to_lab({255, 255, 255});
    CHECK(white.l == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(std::abs(white.a) < 1e-9);
    CHECK(std::abs(white.b) < 1e-9);

    const Lab black = rgb_to_lab({0, 0, 0});
    CHECK(black.l == 0.0);
    CHECK(black.a == 0.0);
    CHECK(black.b == 0.0);

    // Frozen from a double-precision evaluation of the published formulas.
    const Lab red = rgb_to_lab({255, 0, 0});
    CHECK(red.l == doctest::Approx(53.24079).epsilon(1e-6));
    CHECK(red.a == doctest::Approx(80.09247).epsilon(1e-6));
    CHECK(red.b == doctest::Approx(67.20319).epsilon(1e-6));

    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const int r = static_cast<int>(rng.below(256)), g = static_cast<int>(rng.below(256)), b = static_cast<int>(rng.below(256));
        const Lab got = rgb_to_lab({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)});
        const auto want = oracle::lab(r, g, b);
        CHECK(std::abs(got.l - want[0]) < 0.1);
        CHECK(std::abs(got.a - want[1]) < 0.1);
        CHECK(std::abs(got.b - want[2]) < 0.1);
    }
}

TEST_CASE("channel statistics") {
    const double pool[] = {0, 0, 0, 255};
    const ChannelStats s = channel_stats(pool);
    CHECK(s.mean == doctest::Approx(63.75));
    CHECK(s.skew == doctest::Approx(1.1547005383792515).epsilon(1e-12));
    CHECK(s.p50 == doctest::Approx(0.0));
    CHECK(s.p90 == doctest::Approx(178.5));

    const double constant[] = {42.5, 42.5, 42.5};
    const ChannelStats c = channel_stats(constant);
    CHECK(c.std == 0.0);
    CHECK(c.skew == 0.0);
}

TEST_CASE("extract_features") {
    SUBCASE("constant patch") {
        RoiPatch p{RegionClass::nail, 3, 3, std::vector<Rgb>(9, Rgb{100, 100, 100})};
        const RoiPatch nails[] = {p};
        const FeatureVector fv = extract_features(nails, std::span<const RoiPatch>{});
        REQUIRE(fv.values.size() == kFeatureCount);
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const double* s = &fv.values[ch * kStatCount];
            CHECK(s[0] == 100.0);
            CHECK(s[1] == 0.0);
            CHECK(s[2] == 0.0);
            CHECK(s[3] == 100.0);
            CHECK(s[4] == 100.0);
            CHECK(s[5] == 100.0);
        }
    }
    SUBCASE("R channel moments of {0,0,0,255}") {
        RoiPatch p{RegionClass::nail, 4, 1, {{0, 9, 9}, {0, 9, 9}, {0, 9, 9}, {255, 9, 9}}};
        const RoiPatch nails[] = {p};
        const FeatureVector fv = extract_features(nails, nails);
        CHECK(fv.values[0] == doctest::Approx(63.75));
        CHECK(fv.values[2] == doctest::Approx(1.1547).epsilon(1e-4));
    }
    SUBCASE("missing skin mirrors nail and warns") {
        Rng rng(5);
        const ImageBuffer img = random_image(rng, 10, 10);
        const RoiPatch nails[] = {crop_roi(img, {RegionClass::nail, 0.5, 0.5, 0.6, 0.6})};
        std::vector<std::string> warnings;
        const FeatureVector fv = extract_features(nails, std::span<const RoiPatch>{}, &warnings);
        CHECK(warnings.size() == 1);
        const std::size_t half = kFeatureCount / 2;
        for (std::size_t i = 0; i < half; ++i) CHECK(fv.values[i] == fv.values[half + i]);
    }
    SUBCASE("empty nail pool") {
        CHECK(code_of([] { extract_features(std::span<const RoiPatch>{}, std::span<const RoiPatch>{}); }) ==
              errc::invalid_argument);
    }
    SUBCASE("permutation invariance and finiteness") {
        Rng rng(99);
        for (int trial = 0; trial < 20; ++trial) {
            const ImageBuffer img = random_image(rng, 16, 16);
            std::vector<RoiPatch> nails = {crop_roi(img, {RegionClass::nail, 0.3, 0.3, 0.4, 0.4}),
                                           crop_roi(img, {RegionClass::nail, 0.7, 0.7, 0.3, 0.5})};
            std::vector<RoiPatch> skin = {crop_roi(img, {RegionClass::skin, 0.5, 0.5, 0.2, 0.2})};
            const FeatureVector a = extract_features(nails, skin);
            for (double v : a.values) CHECK(std::isfinite(v));

            std::swap(nails[0], nails[1]);
            for (auto& p : nails) rng.shuffle(std::span<Rgb>(p.pixels));
            rng.shuffle(std::span<Rgb>(skin[0].pixels));
            CHECK(extract_features(nails, skin) == a);
        }
    }
    SUBCASE("names line up with the layout") {
        const auto& names = feature_names();
        REQUIRE(names.size() == kFeatureCount);
        CHECK(names[0] == "nail_R_mean");
        CHECK(names[2] == "nail_R_skew");
        CHECK(names[kStatCount * 3] == "nail_L_mean");
        CHECK(names[kFeatureCount - 1] == "skin_b_p90");
    }
}

TEST_CASE("features_from_image attributes stages") {
    const ImageBuffer img(20, 20, Rgb{120, 80, 70});
    const BoundingBox skin_only[] = {{RegionClass::skin, 0.5, 0.5, 0.5, 0.5}};
    try {
        features_from_image(img, skin_only);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "crop");
        CHECK(std::string(e.what()).find("no nail region") != std::string::npos);
    }

    const BoundingBox boxes[] = {{RegionClass::nail, 0.5, 0.5, 0.5, 0.5}, {RegionClass::reference, 0.1, 0.1, 0.1, 0.1}};
    const FeatureVector fv = features_from_image(img, boxes);
    CHECK(fv.values[0] == 255.0);
}

TEST_CASE("PPM codec round trip") {
    Rng rng(1);
    const ImageBuffer img = random_image(rng, 7, 5);
    const std::string bytes = encode_ppm(img);
    const auto* data = reinterpret_cast<const std::uint8_t*>(bytes.data());
    CHECK(decode_image({data, bytes.size()}) == img);
    CHECK(code_of([&] { decode_image({data, bytes.size() - 4}); }) == errc::parse);
}
