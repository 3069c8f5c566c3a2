#include "doctest.h"

#include "edgehr/balance/kde.hpp"
#include "edgehr/balance/labels.hpp"
#include "edgehr/common/error.hpp"
#include "edgehr/common/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

using namespace edgehr;
using namespace edgehr::balance;

namespace {

double brute_density(const std::vector<double>& values, double h, double x) {
    double acc = 0.0;
    for (double v : values) acc += std::exp(-(x - v) * (x - v) / (2.0 * h * h)) / (h * std::sqrt(2.0 * std::numbers::pi));
    return acc / static_cast<double>(values.size());
}

double trapezoid(const std::vector<double>& values, double h, double lo, double hi, int steps) {
    const double dx = (hi - lo) / steps;
    double acc = 0.5 * (kde_density(values, h, lo) + kde_density(values, h, hi));
    for (int i = 1; i < steps; ++i) acc += kde_density(values, h, lo + i * dx);
    return acc * dx;
}

std::vector<LabeledSample> make_samples(const std::vector<double>& hbs) {
    std::vector<LabeledSample> out;
    for (std::size_t i = 0; i < hbs.size(); ++i) out.push_back({{1, {static_cast<double>(i)}}, hbs[i], i});
    return out;
}

} // namespace

TEST_CASE("remark and severity labels") {
    CHECK(remark_of(11.9) == RemarkClass::anemic);
    CHECK(remark_of(12.0) == RemarkClass::non_anemic);
    CHECK(remark_of(14.0) == RemarkClass::non_anemic);

    CHECK(severity_of(7.9) == SeverityClass::severe);
    CHECK(severity_of(8.0) == SeverityClass::moderate);
    CHECK(severity_of(11.0) == SeverityClass::mild);
    CHECK(severity_of(13.5) == SeverityClass::non_anemic);

    for (double bad : {0.0, -1.0, 25.0, 30.0, std::nan("")}) {
        CHECK_THROWS_AS(remark_of(bad), Error);
        CHECK_THROWS_AS(severity_of(bad), Error);
    }

    // severity != non_anemic <=> remark == anemic
    for (double hb = 0.05; hb < 25.0; hb += 0.05) {
        CHECK((severity_of(hb) != SeverityClass::non_anemic) == (remark_of(hb) == RemarkClass::anemic));
    }
}

TEST_CASE("kde_density") {
    const std::vector<double> one = {10.0};
    CHECK(kde_density(one, 1.0, 10.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
    const std::vector<double> two = {9.0, 11.0};
    CHECK(kde_density(two, 1.0, 10.0) == doctest::Approx(0.24197072451914337).epsilon(1e-12));
    CHECK_THROWS_AS(kde_density(one, 0.0, 1.0), Error);
    CHECK_THROWS_AS(kde_density(one, -1.0, 1.0), Error);

    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> vals;
        const std::size_t n = 1 + rng.below(40);
        for (std::size_t i = 0; i < n; ++i) vals.push_back(6.0 + 12.0 * rng.uniform01());
        const double h = 0.3 + 1.5 * rng.uniform01();
        CHECK(std::abs(trapezoid(vals, h, -20.0, 45.0, 20000) - 1.0) < 1e-3);
        for (int k = 0; k < 5; ++k) {
            const double x = 25.0 * rng.uniform01();
            CHECK(kde_density(vals, h, x) >= 0.0);
            CHECK(std::abs(kde_density(vals, h, x) - brute_density(vals, h, x)) < 1e-12);
        }
    }
}

TEST_CASE("silverman_bandwidth") {
    const std::vector<double> ten = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(silverman_bandwidth(ten) == doctest::Approx(1.719286404692283).epsilon(1e-9));
    const std::vector<double> single = {3.0};
    CHECK_THROWS_AS(silverman_bandwidth(single), Error);
    const std::vector<double> flat = {4.0, 4.0, 4.0};
    CHECK_THROWS_AS(silverman_bandwidth(flat), Error);
    // IQR of zero falls back to the standard deviation.
    const std::vector<double> spike = {5, 5, 5, 5, 5, 5, 5, 5, 9};
    CHECK(silverman_bandwidth(spike) > 0.0);
}

TEST_CASE("kde_undersample") {
    SUBCASE("already balanced input is returned whole") {
        const auto samples = make_samples({10.0, 11.0, 13.0, 14.0});
        const auto res = kde_undersample(samples, LabelMode::remark, 1);
        CHECK(res.samples.size() == 4);
        CHECK(res.kept_positions == std::vector<std::size_t>{0, 1, 2, 3});
    }
    SUBCASE("25 anemic vs 75 non-anemic, checked against a reference sampler") {
        Rng gen(5);
        std::vector<double> hbs;
        for (int i = 0; i < 25; ++i) hbs.push_back(7.0 + 4.9 * gen.uniform01());
        for (int i = 0; i < 75; ++i) hbs.push_back(12.0 + 4.0 * gen.uniform01() * gen.uniform01());
        gen.shuffle(std::span<double>(hbs));
        const auto samples = make_samples(hbs);
        const std::uint64_t seed = 4242;
        const auto res = kde_undersample(samples, LabelMode::remark, seed);

        std::map<int, int> counts;
        for (const auto& s : res.samples) ++counts[static_cast<int>(remark_of(s.hb_gdl))];
        CHECK(counts[0] == 25);
        CHECK(counts[1] == 25);

        // Reference: weights 1/density with a brute-force density, keys u^(1/w).
        std::vector<std::size_t> majority;
        std::vector<double> values;
        for (std::size_t i = 0; i < hbs.size(); ++i) {
            if (hbs[i] >= 12.0) {
                majority.push_back(i);
                values.push_back(hbs[i]);
            }
        }
        const double h = silverman_bandwidth(values);
        Rng rng(derive_seed(seed, 1));
        std::vector<std::pair<double, std::size_t>> keys;
        for (std::size_t j = 0; j < majority.size(); ++j) {
            const double w = 1.0 / brute_density(values, h, values[j]);
            keys.emplace_back(std::pow(rng.uniform01(), 1.0 / w), majority[j]);
        }
        std::sort(keys.begin(), keys.end(), [](auto& a, auto& b) { return a.first > b.first; });
        std::set<std::size_t> expected;
        for (std::size_t j = 0; j < 25; ++j) expected.insert(keys[j].second);
        for (std::size_t i = 0; i < hbs.size(); ++i) {
            if (hbs[i] < 12.0) expected.insert(i);
        }
        CHECK(std::set<std::size_t>(res.kept_positions.begin(), res.kept_positions.end()) == expected);

        CHECK(res.report.classes[1].before == 75);
        CHECK(res.report.classes[1].after == 25);
        CHECK(res.report.classes[1].bandwidth == doctest::Approx(h));
    }
    SUBCASE("determinism and subset property across seeds and modes") {
        Rng gen(77);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<double> hbs;
            const std::size_t n = 20 + gen.below(100);
            for (std::size_t i = 0; i < n; ++i) hbs.push_back(5.0 + 12.0 * gen.uniform01());
            hbs.push_back(7.0);
            hbs.push_back(9.0);
            hbs.push_back(11.5);
            hbs.push_back(13.0);
            const auto samples = make_samples(hbs);
            for (LabelMode mode : {LabelMode::remark, LabelMode::severity}) {
                const std::uint64_t seed = gen.next_u64();
                const auto a = kde_undersample(samples, mode, seed);
                const auto b = kde_undersample(samples, mode, seed);
                CHECK(a.kept_positions == b.kept_positions);

                std::vector<std::size_t> per_class(static_cast<std::size_t>(class_count(mode)), 0);
                for (const auto& s : a.samples) ++per_class[static_cast<std::size_t>(class_index(mode, s.hb_gdl))];
                CHECK(std::all_of(per_class.begin(), per_class.end(), [&](std::size_t c) { return c == per_class[0]; }));
                for (std::size_t i = 0; i < a.samples.size(); ++i) {
                    CHECK(a.samples[i].id == samples[a.kept_positions[i]].id);
                }
                for (const auto& c : a.report.classes) CHECK(c.after <= c.before);
            }
        }
    }
    SUBCASE("empty class is named") {
        const auto samples = make_samples({13.0, 14.0});
        try {
            kde_undersample(samples, LabelMode::remark, 1);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("anemic") != std::string::npos);
        }
    }
    SUBCASE("report serialization") {
        const auto samples = make_samples({10.0, 13.0, 14.0, 15.0});
        const auto res = kde_undersample(samples, LabelMode::remark, 9);
        const std::string csv = res.report.to_csv();
        CHECK(csv.rfind("class,before,after,bandwidth,seed\n", 0) == 0);
        CHECK(csv.find("non_anemic,3,1,") != std::string::npos);
        CHECK(res.report.to_json().find("\"seed\":9") != std::string::npos);
    }
}
