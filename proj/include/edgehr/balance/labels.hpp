/**
 * @file labels.hpp
 * @brief Anemia remark and severity labeling of hemoglobin values.
 */

#pragma once

#include "edgehr/imaging/features.hpp"

#include <string_view>
#include <vector>

namespace edgehr::balance {

/// Physiological sanity bound: 0 < hb < 25 g/dL.
inline constexpr double kHbLowerBound = 0.0;
inline constexpr double kHbUpperBound = 25.0;

/// Remark threshold: anemic iff hb < 12 g/dL.
inline constexpr double kAnemiaThreshold = 12.0;

/// Severity cutoffs (g/dL): severe < 8, moderate [8, 11), mild [11, 12).
struct SeverityCutoffs {
    double severe_below = 8.0;
    double moderate_below = 11.0;
    double mild_below = kAnemiaThreshold;
};

enum class RemarkClass { anemic = 0, non_anemic = 1 };
enum class SeverityClass { non_anemic = 0, mild = 1, moderate = 2, severe = 3 };

/// Which labeler drives balancing and classification.
enum class LabelMode { remark, severity };

std::string_view to_string(RemarkClass c) noexcept;
std::string_view to_string(SeverityClass c) noexcept;
std::string_view to_string(LabelMode m) noexcept;
LabelMode parse_label_mode(std::string_view text);

/// Throws errc::range outside the sanity bound.
void check_hb(double hb_gdl);

RemarkClass remark_of(double hb_gdl);
SeverityClass severity_of(double hb_gdl, const SeverityCutoffs& cutoffs = {});

/// Class index under a labeler: remark {0 anemic, 1 non_anemic},
/// severity {0 non_anemic, 1 mild, 2 moderate, 3 severe}.
int class_index(LabelMode mode, double hb_gdl);
int class_count(LabelMode mode) noexcept;
std::string_view class_name(LabelMode mode, int index);

struct LabeledSample {
    imaging::FeatureVector features;
    double hb_gdl = 0.0;
    /// Stable identifier (dataset row); used to audit split hygiene.
    std::size_t id = 0;
};

} // namespace edgehr::balance
