#include "edgehr/service/export.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/time.hpp"
#include "edgehr/vault/crypto.hpp"

#include <algorithm>
#include <cstdio>
#include <tuple>

namespace edgehr::service {

namespace {

struct Ymd {
    int y, m, d;
};

Ymd ymd_of(std::int64_t days) {
    const std::string s = format_date(days);
    return {std::stoi(s.substr(0, 4)), std::stoi(s.substr(5, 2)), std::stoi(s.substr(8, 2))};
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace

std::string pseudonym(std::span<const std::uint8_t> export_key, const std::string& patient_id) {
    const std::string msg = "edgehr/v1/pseudonym:" + patient_id;
    const auto mac = vault::hmac_sha256(export_key, vault::as_bytes(msg));
    return vault::to_hex(std::span<const std::uint8_t>(mac.data(), 16));
}

std::string age_bucket(const std::string& birth_date, std::int64_t on_date) {
    if (birth_date.empty()) return "unknown";
    std::int64_t born = 0;
    try {
        born = parse_date(birth_date);
    } catch (const Error&) {
        return "unknown";
    }
    if (born > on_date) return "unknown";
    const Ymd b = ymd_of(born);
    const Ymd t = ymd_of(on_date);
    int age = t.y - b.y;
    if (std::tie(t.m, t.d) < std::tie(b.m, b.d)) --age;
    const int lo = age / 5 * 5;
    return std::to_string(lo) + "-" + std::to_string(lo + 4);
}

ExportResult export_anonymized(const vault::Store& store, std::span<const std::uint8_t> export_key) {
    if (export_key.size() < 16) throw Error(errc::invalid_argument, "export key must be at least 16 bytes");
    struct Row {
        std::string pseudonym;
        std::int64_t ts;
        std::string line;
    };
    std::vector<Row> rows;
    ExportResult out;
    for (const auto& meta : store.list()) {
        vault::PatientRecord rec;
        try {
            rec = store.get(meta.patient_id);
        } catch (const Error& e) {
            if (e.code() != errc::integrity && e.code() != errc::corruption) throw;
            ++out.skipped_records;
            continue;
        }
        const std::string p = pseudonym(export_key, rec.patient_id);
        for (const auto& s : rec.screenings) {
            const std::int64_t day = days_of(s.timestamp_ms);
            char hb[32];
            std::snprintf(hb, sizeof hb, "%.2f", s.predicted_hb_gdl);
            std::string line = p + "," + age_bucket(rec.demographics.birth_date, day) + "," +
                               csv_field(rec.demographics.sex) + "," + hb + "," + csv_field(s.remark) + "," +
                               csv_field(s.severity) + "," + format_date(day) + "\n";
            rows.push_back({p, s.timestamp_ms, std::move(line)});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.pseudonym, a.ts, a.line) < std::tie(b.pseudonym, b.ts, b.line);
    });
    out.csv = "pseudonym,age_bucket,sex,hb_gdl,remark,severity,date\n";
    for (const auto& r : rows) out.csv += r.line;
    out.rows = rows.size();
    return out;
}

} // namespace edgehr::service
