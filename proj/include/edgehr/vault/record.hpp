/**
 * @file record.hpp
 * @brief Patient records and their canonical JSON form.
 *
 * The canonical form is compact JSON with object keys in sorted order and a
 * top-level `"format": 1`. Keys this version does not know about are kept
 * in `extra` at every level and written back unchanged, so records written
 * by a newer build survive a round trip through an older one.
 */

#pragma once

#include "edgehr/imaging/features.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgehr::vault {

inline constexpr int kRecordFormat = 1;

/// Unknown-field bags compare equal when both are empty, null or not.
inline bool same_extra(const nlohmann::json& a, const nlohmann::json& b) {
    return a.empty() && b.empty() ? true : a == b;
}

struct Demographics {
    std::string name;
    /// YYYY-MM-DD or empty.
    std::string birth_date;
    /// female, male, other or unknown.
    std::string sex = "unknown";
    std::string contact;
    nlohmann::json extra = nlohmann::json::object();

    friend bool operator==(const Demographics& a, const Demographics& b) {
        return a.name == b.name && a.birth_date == b.birth_date && a.sex == b.sex && a.contact == b.contact &&
               same_extra(a.extra, b.extra);
    }
};

struct Encounter {
    std::int64_t timestamp_ms = 0;
    std::string notes;
    nlohmann::json extra = nlohmann::json::object();

    friend bool operator==(const Encounter& a, const Encounter& b) {
        return a.timestamp_ms == b.timestamp_ms && a.notes == b.notes && same_extra(a.extra, b.extra);
    }
};

struct Screening {
    std::int64_t timestamp_ms = 0;
    std::string image_ref;
    imaging::FeatureVector features;
    double predicted_hb_gdl = 0.0;
    std::string remark;
    std::string severity;
    std::string model_version;
    double latency_ms = 0.0;
    nlohmann::json extra = nlohmann::json::object();

    friend bool operator==(const Screening& a, const Screening& b) {
        return a.timestamp_ms == b.timestamp_ms && a.image_ref == b.image_ref && a.features == b.features &&
               a.predicted_hb_gdl == b.predicted_hb_gdl && a.remark == b.remark && a.severity == b.severity &&
               a.model_version == b.model_version && a.latency_ms == b.latency_ms && same_extra(a.extra, b.extra);
    }
};

struct PatientRecord {
    std::string patient_id;
    Demographics demographics;
    std::vector<Encounter> encounters;
    std::vector<Screening> screenings;
    nlohmann::json extra = nlohmann::json::object();

    friend bool operator==(const PatientRecord& a, const PatientRecord& b) {
        return a.patient_id == b.patient_id && a.demographics == b.demographics && a.encounters == b.encounters &&
               a.screenings == b.screenings && same_extra(a.extra, b.extra);
    }
};

/// 1 to 64 characters from [A-Za-z0-9_-].
bool valid_patient_id(std::string_view id) noexcept;

/// Throws errc::invalid_argument naming the first violated rule: id syntax,
/// sex vocabulary, birth date, non-monotone timestamps, non-finite numbers.
void validate(const PatientRecord& record);

nlohmann::json to_json(const PatientRecord& record);
nlohmann::json to_json(const Screening& screening);
/// errc::parse on wrong types or missing required keys; also validates.
PatientRecord record_from_json(const nlohmann::json& j);
Screening screening_from_json(const nlohmann::json& j);

std::string canonical_bytes(const PatientRecord& record);
PatientRecord parse_record(std::string_view canonical);

} // namespace edgehr::vault
