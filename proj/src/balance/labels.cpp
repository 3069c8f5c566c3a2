#include "edgehr/balance/labels.hpp"

#include "edgehr/common/error.hpp"

#include <cmath>
#include <string>

namespace edgehr::balance {

std::string_view to_string(RemarkClass c) noexcept {
    return c == RemarkClass::anemic ? "anemic" : "non_anemic";
}

std::string_view to_string(SeverityClass c) noexcept {
    switch (c) {
    case SeverityClass::non_anemic: return "non_anemic";
    case SeverityClass::mild: return "mild";
    case SeverityClass::moderate: return "moderate";
    case SeverityClass::severe: return "severe";
    }
    return "unknown";
}

std::string_view to_string(LabelMode m) noexcept { return m == LabelMode::remark ? "remark" : "severity"; }

LabelMode parse_label_mode(std::string_view text) {
    if (text == "remark") return LabelMode::remark;
    if (text == "severity") return LabelMode::severity;
    throw Error(errc::invalid_argument, "unknown label mode '" + std::string(text) + "'");
}

void check_hb(double hb_gdl) {
    if (!(hb_gdl > kHbLowerBound && hb_gdl < kHbUpperBound)) {
        throw Error(errc::range, "hemoglobin " + std::to_string(hb_gdl) + " g/dL outside (0, 25)");
    }
}

RemarkClass remark_of(double hb_gdl) {
    check_hb(hb_gdl);
    return hb_gdl < kAnemiaThreshold ? RemarkClass::anemic : RemarkClass::non_anemic;
}

SeverityClass severity_of(double hb_gdl, const SeverityCutoffs& cutoffs) {
    check_hb(hb_gdl);
    if (hb_gdl < cutoffs.severe_below) return SeverityClass::severe;
    if (hb_gdl < cutoffs.moderate_below) return SeverityClass::moderate;
    if (hb_gdl < cutoffs.mild_below) return SeverityClass::mild;
    return SeverityClass::non_anemic;
}

int class_index(LabelMode mode, double hb_gdl) {
    return mode == LabelMode::remark ? static_cast<int>(remark_of(hb_gdl)) : static_cast<int>(severity_of(hb_gdl));
}

int class_count(LabelMode mode) noexcept { return mode == LabelMode::remark ? 2 : 4; }

std::string_view class_name(LabelMode mode, int index) {
    if (index < 0 || index >= class_count(mode)) throw Error(errc::range, "class index out of range");
    return mode == LabelMode::remark ? to_string(static_cast<RemarkClass>(index))
                                     : to_string(static_cast<SeverityClass>(index));
}

} // namespace edgehr::balance
