#include "edgehr/imaging/features.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/imaging/color.hpp"
#include "edgehr/imaging/roi.hpp"
#include "edgehr/imaging/stage_error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

namespace edgehr::imaging {

namespace {

struct WeightedValue {
    double value;
    std::uint64_t count;
};

// Values at ascending 0-based ranks of the expanded multiset. One counting
// pass over equal-width buckets locates the bucket holding each rank, and only
// those buckets get sorted. The bucket index is monotone in the value, so
// ranks carry over unchanged.
template <std::size_t K>
std::array<double, K> values_at_ranks(const std::vector<WeightedValue>& vals, const std::array<std::uint64_t, K>& ranks,
                                      double lo, double hi) {
    const auto by_value = [](const WeightedValue& a, const WeightedValue& b) { return a.value < b.value; };
    std::array<double, K> out{};
    auto walk = [&](const std::vector<WeightedValue>& sorted, std::uint64_t before, std::size_t r) {
        std::uint64_t k = ranks[r] - before;
        for (const auto& v : sorted) {
            if (k < v.count) return v.value;
            k -= v.count;
        }
        return sorted.back().value;
    };
    if (vals.size() <= 64 || !(hi > lo)) {
        std::vector<WeightedValue> sorted = vals;
        std::sort(sorted.begin(), sorted.end(), by_value);
        for (std::size_t r = 0; r < K; ++r) out[r] = walk(sorted, 0, r);
        return out;
    }

    const std::size_t nb = std::min<std::size_t>(4096, vals.size());
    const double scale = static_cast<double>(nb) / (hi - lo);
    auto bucket_of = [&](double v) {
        return std::min(static_cast<std::size_t>((v - lo) * scale), nb - 1);
    };
    std::vector<std::uint64_t> counts(nb, 0);
    for (const auto& v : vals) counts[bucket_of(v.value)] += v.count;

    // Target bucket of each rank, plus the expanded count before that bucket.
    std::array<std::size_t, K> target{};
    std::array<std::uint64_t, K> before{};
    std::size_t b = 0;
    std::uint64_t acc = 0;
    for (std::size_t r = 0; r < K; ++r) {
        while (acc + counts[b] <= ranks[r]) acc += counts[b++];
        target[r] = b;
        before[r] = acc;
    }

    std::vector<int> slot(nb, -1);
    std::vector<std::vector<WeightedValue>> groups;
    for (std::size_t r = 0; r < K; ++r) {
        if (slot[target[r]] < 0) {
            slot[target[r]] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
    }
    for (const auto& v : vals) {
        const int g = slot[bucket_of(v.value)];
        if (g >= 0) groups[static_cast<std::size_t>(g)].push_back(v);
    }
    for (auto& g : groups) std::sort(g.begin(), g.end(), by_value);
    for (std::size_t r = 0; r < K; ++r) {
        out[r] = walk(groups[static_cast<std::size_t>(slot[target[r]])], before[r], r);
    }
    return out;
}

// Moments accumulate in the order given; callers pass a canonical order
// (sorted values, or color-key order) so the result does not depend on
// patch or pixel order.
ChannelStats weighted_stats(const std::vector<WeightedValue>& vals) {
    std::uint64_t n = 0;
    double sum = 0.0;
    for (const auto& v : vals) {
        n += v.count;
        sum += v.value * static_cast<double>(v.count);
    }
    const double dn = static_cast<double>(n);
    ChannelStats s;
    s.mean = sum / dn;

    double m2 = 0.0;
    double m3 = 0.0;
    for (const auto& v : vals) {
        const double d = v.value - s.mean;
        m2 += static_cast<double>(v.count) * d * d;
        m3 += static_cast<double>(v.count) * d * d * d;
    }
    m2 /= dn;
    m3 /= dn;

    const double spread = std::sqrt(m2);
    if (spread > 1e-12 * std::max(1.0, std::abs(s.mean))) {
        s.std = spread;
        s.skew = m3 / (m2 * spread);
    }

    double lo = vals.front().value;
    double hi = lo;
    for (const auto& v : vals) {
        lo = std::min(lo, v.value);
        hi = std::max(hi, v.value);
    }
    std::array<double, 3> pos{};
    std::array<std::uint64_t, 6> ranks{};
    const std::array<double, 3> qs{0.10, 0.50, 0.90};
    for (std::size_t i = 0; i < 3; ++i) {
        pos[i] = qs[i] * static_cast<double>(n - 1);
        ranks[2 * i] = static_cast<std::uint64_t>(std::floor(pos[i]));
        ranks[2 * i + 1] = std::min(ranks[2 * i] + 1, n - 1);
    }
    const auto at = values_at_ranks(vals, ranks, lo, hi);
    std::array<double, 3> pct{};
    for (std::size_t i = 0; i < 3; ++i) {
        const double a = at[2 * i];
        const double b = at[2 * i + 1];
        pct[i] = a + (pos[i] - static_cast<double>(ranks[2 * i])) * (b - a);
    }
    s.p10 = pct[0];
    s.p50 = pct[1];
    s.p90 = pct[2];
    return s;
}

using ColorCounts = std::vector<std::pair<std::uint32_t, std::uint64_t>>;

// Large ROIs need tens of MB of scratch, and fresh pages cost a first-touch
// fault each, which showed up as several ms per image. Buffers are kept per
// thread and reused. Regions are processed one after another, so one set is
// enough.
struct Scratch {
    std::vector<std::uint32_t> keys;
    std::vector<std::uint32_t> tmp;
    ColorCounts colors;
    std::array<std::vector<WeightedValue>, 3> lab;
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

// Distinct 24-bit colors with their pixel counts, ascending by key. An LSD
// radix sort over the packed keys keeps large ROIs cheap.
const ColorCounts& pool_colors(std::span<const RoiPatch> patches) {
    auto& keys = scratch().keys;
    auto& tmp = scratch().tmp;
    keys.clear();
    for (const auto& patch : patches) {
        for (const Rgb& p : patch.pixels) keys.push_back((std::uint32_t{p.r} << 16) | (std::uint32_t{p.g} << 8) | p.b);
    }
    tmp.resize(keys.size());
    for (int shift = 0; shift < 24; shift += 8) {
        std::array<std::size_t, 257> offsets{};
        for (auto k : keys) ++offsets[((k >> shift) & 0xFFu) + 1];
        for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
        for (auto k : keys) tmp[offsets[(k >> shift) & 0xFFu]++] = k;
        keys.swap(tmp);
    }
    auto& out = scratch().colors;
    out.clear();
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        out.emplace_back(keys[i], j - i);
        i = j;
    }
    return out;
}

std::array<ChannelStats, kChannelCount> region_stats(const ColorCounts& colors) {
    // R, G and B are 8-bit, so a 256-bin histogram is already in value order.
    std::array<std::array<std::uint64_t, 256>, 3> hist{};
    auto& lab = scratch().lab;
    for (auto& c : lab) c.resize(colors.size());
    for (std::size_t i = 0; i < colors.size(); ++i) {
        const auto [key, count] = colors[i];
        const Rgb p{static_cast<std::uint8_t>(key >> 16), static_cast<std::uint8_t>(key >> 8),
                    static_cast<std::uint8_t>(key)};
        hist[0][p.r] += count;
        hist[1][p.g] += count;
        hist[2][p.b] += count;
        const Lab v = rgb_to_lab(p);
        lab[0][i] = {v.l, count};
        lab[1][i] = {v.a, count};
        lab[2][i] = {v.b, count};
    }
    std::array<ChannelStats, kChannelCount> out;
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<WeightedValue> bins;
        for (std::size_t v = 0; v < 256; ++v) {
            if (hist[c][v]) bins.push_back({static_cast<double>(v), hist[c][v]});
        }
        out[c] = weighted_stats(bins);
        out[c + 3] = weighted_stats(lab[c]);
    }
    return out;
}

void append(std::vector<double>& out, const std::array<ChannelStats, kChannelCount>& stats) {
    for (const auto& s : stats) {
        out.insert(out.end(), {s.mean, s.std, s.skew, s.p10, s.p50, s.p90});
    }
}

bool has_pixels(std::span<const RoiPatch> patches) {
    return std::any_of(patches.begin(), patches.end(), [](const RoiPatch& p) { return !p.pixels.empty(); });
}

} // namespace

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        out.reserve(kFeatureCount);
        for (const char* region : {"nail", "skin"}) {
            for (const char* channel : {"R", "G", "B", "L", "a", "b"}) {
                for (const char* stat : {"mean", "std", "skew", "p10", "p50", "p90"}) {
                    out.push_back(std::string(region) + "_" + channel + "_" + stat);
                }
            }
        }
        return out;
    }();
    return names;
}

ChannelStats channel_stats(std::span<const double> values) {
    if (values.empty()) throw Error(errc::invalid_argument, "channel statistics of an empty pool");
    std::vector<WeightedValue> vals;
    vals.reserve(values.size());
    for (double v : values) vals.push_back({v, 1});
    std::sort(vals.begin(), vals.end(), [](const WeightedValue& a, const WeightedValue& b) { return a.value < b.value; });
    return weighted_stats(vals);
}

FeatureVector extract_features(std::span<const RoiPatch> nail_patches,
                               std::span<const RoiPatch> skin_patches,
                               std::vector<std::string>* warnings) {
    if (!has_pixels(nail_patches)) throw Error(errc::invalid_argument, "no nail region");

    FeatureVector fv;
    fv.values.reserve(kFeatureCount);
    const auto nail = region_stats(pool_colors(nail_patches));
    append(fv.values, nail);

    if (has_pixels(skin_patches)) {
        append(fv.values, region_stats(pool_colors(skin_patches)));
    } else {
        append(fv.values, nail);
        if (warnings) warnings->push_back("no skin region: skin features mirror nail features");
    }
    return fv;
}

FeatureVector features_from_image(const ImageBuffer& image,
                                  std::span<const BoundingBox> boxes,
                                  std::vector<std::string>* warnings) {
    std::vector<BoundingBox> references;
    for (const auto& b : boxes) {
        if (b.region == RegionClass::reference) references.push_back(b);
    }

    const ImageBuffer* source = &image;
    std::optional<ImageBuffer> balanced;
    if (!references.empty()) {
        try {
            balanced = white_balance(image, references);
        } catch (const Error& e) {
            throw StageError(e.code(), "white_balance", e.what());
        }
        source = &*balanced;
    } else if (warnings) {
        warnings->push_back("no reference region: colors not normalized");
    }

    std::vector<RoiPatch> nail;
    std::vector<RoiPatch> skin;
    try {
        for (const auto& b : boxes) {
            if (b.region == RegionClass::nail) nail.push_back(crop_roi(*source, b));
            if (b.region == RegionClass::skin) skin.push_back(crop_roi(*source, b));
        }
    } catch (const Error& e) {
        throw StageError(e.code(), "crop", e.what());
    }
    if (nail.empty()) throw StageError(errc::invalid_argument, "crop", "no nail region");

    try {
        return extract_features(nail, skin, warnings);
    } catch (const Error& e) {
        throw StageError(e.code(), "features", e.what());
    }
}

} // namespace edgehr::imaging
