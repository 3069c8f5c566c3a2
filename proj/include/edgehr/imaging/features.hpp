/**
 * @file features.hpp
 * @brief Color-statistic feature vectors for hemoglobin regression.
 *
 * Layout (contract version 1, 72 values): region-major over {nail, skin},
 * then channel over {R, G, B, L, a, b}, then statistic over
 * {mean, std, skew, p10, p50, p90}. Names follow `<region>_<channel>_<stat>`,
 * e.g. `nail_R_mean`, `skin_b_p90`. See docs/feature_contract.md.
 */

#pragma once

#include "edgehr/imaging/image.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace edgehr::imaging {

inline constexpr std::uint32_t kFeatureContractVersion = 1;
inline constexpr std::size_t kChannelCount = 6;
inline constexpr std::size_t kRegionCount = 2;
inline constexpr std::size_t kStatCount = 6;
inline constexpr std::size_t kFeatureCount = kChannelCount * kRegionCount * kStatCount;

struct FeatureVector {
    std::uint32_t contract_version = kFeatureContractVersion;
    std::vector<double> values;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

const std::vector<std::string>& feature_names();

/// Statistics of one channel pool. std is the population deviation
/// sqrt(m2); skew is m3 / m2^1.5 and both are 0 for a zero-variance pool.
struct ChannelStats {
    double mean = 0.0;
    double std = 0.0;
    double skew = 0.0;
    double p10 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
};

ChannelStats channel_stats(std::span<const double> values);

/// Pools pixels per region class and emits the 72-value vector. Missing
/// skin patches mirror the nail statistics into the skin slots and append
/// a data-quality warning. Throws errc::invalid_argument on an empty nail pool.
FeatureVector extract_features(std::span<const RoiPatch> nail_patches,
                               std::span<const RoiPatch> skin_patches,
                               std::vector<std::string>* warnings = nullptr);

/// Full imaging path: white balance against reference boxes (when any),
/// crop nail and skin boxes, extract features. Errors are rethrown as
/// StageError naming the failing stage.
FeatureVector features_from_image(const ImageBuffer& image,
                                  std::span<const BoundingBox> boxes,
                                  std::vector<std::string>* warnings = nullptr);

} // namespace edgehr::imaging
