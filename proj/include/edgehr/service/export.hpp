#pragma once

#include "edgehr/vault/store.hpp"

#include <span>
#include <string>

namespace edgehr::service {

/// Keyed pseudonym: first 16 bytes of HMAC-SHA256(export key,
/// "edgehr/v1/pseudonym:" + patient id), hex. Stable for one key,
/// unlinkable across keys.
std::string pseudonym(std::span<const std::uint8_t> export_key, const std::string& patient_id);

/// "30-34" style 5-year bin of the age in whole years on `on_date`
/// (days since epoch), or "unknown" without a usable birth date.
std::string age_bucket(const std::string& birth_date, std::int64_t on_date);

struct ExportResult {
    std::string csv;
    std::size_t rows = 0;
    /// Records that failed to decrypt and were left out.
    std::size_t skipped_records = 0;
};

/// One row per screening of every live record:
/// pseudonym,age_bucket,sex,hb_gdl,remark,severity,date
/// Rows are sorted by pseudonym, then date, so output order does not leak
/// the patient id order. The key must be at least 16 bytes.
ExportResult export_anonymized(const vault::Store& store, std::span<const std::uint8_t> export_key);

} // namespace edgehr::service
