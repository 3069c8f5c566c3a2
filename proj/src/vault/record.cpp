#include "edgehr/vault/record.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/time.hpp"

#include <cmath>

namespace edgehr::vault {

using nlohmann::json;

namespace {

// Pulls the known keys out of `j`; whatever is left becomes `extra`.
class Reader {
public:
    Reader(const json& j, std::string where) : rest_(j), where_(std::move(where)) {
        if (!j.is_object()) throw Error(errc::parse, where_ + " must be an object");
    }

    bool has(const char* key) const { return rest_.contains(key); }

    std::string str(const char* key, std::string fallback = {}, bool required = false) {
        auto v = take(key, required);
        if (!v) return fallback;
        if (!v->is_string()) throw Error(errc::parse, where_ + "." + key + " must be a string");
        return v->get<std::string>();
    }

    double num(const char* key, double fallback = 0.0, bool required = false) {
        auto v = take(key, required);
        if (!v) return fallback;
        if (!v->is_number()) throw Error(errc::parse, where_ + "." + key + " must be a number");
        return v->get<double>();
    }

    std::int64_t timestamp(const char* key) {
        const auto s = str(key, {}, true);
        return parse_timestamp(s);
    }

    json array(const char* key) {
        auto v = take(key, false);
        if (!v) return json::array();
        if (!v->is_array()) throw Error(errc::parse, where_ + "." + key + " must be an array");
        return *v;
    }

    json object(const char* key) {
        auto v = take(key, false);
        if (!v) return json::object();
        if (!v->is_object()) throw Error(errc::parse, where_ + "." + key + " must be an object");
        return *v;
    }

    json rest() const { return rest_; }

private:
    std::optional<json> take(const char* key, bool required) {
        auto it = rest_.find(key);
        if (it == rest_.end()) {
            if (required) throw Error(errc::parse, where_ + "." + key + " is required");
            return std::nullopt;
        }
        json v = *it;
        rest_.erase(it);
        return v;
    }

    json rest_;
    std::string where_;
};

json with_extra(json base, const json& extra) {
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        if (!base.contains(it.key())) base[it.key()] = it.value();
    }
    return base;
}

Screening screening_from(const json& j, const std::string& where) {
    Reader r(j, where);
    Screening s;
    s.timestamp_ms = r.timestamp("timestamp");
    s.image_ref = r.str("image_ref");
    s.predicted_hb_gdl = r.num("predicted_hb_gdl", 0.0, true);
    s.remark = r.str("remark");
    s.severity = r.str("severity");
    s.model_version = r.str("model_version");
    s.latency_ms = r.num("latency_ms");
    json f = r.object("features");
    if (!f.empty()) {
        Reader fr(f, where + ".features");
        s.features.contract_version = static_cast<std::uint32_t>(fr.num("contract_version", 0.0, true));
        for (const auto& v : fr.array("values")) {
            if (!v.is_number()) throw Error(errc::parse, where + ".features.values must be numbers");
            s.features.values.push_back(v.get<double>());
        }
    }
    s.extra = r.rest();
    return s;
}

} // namespace

bool valid_patient_id(std::string_view id) noexcept {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

void validate(const PatientRecord& record) {
    if (!valid_patient_id(record.patient_id)) {
        throw Error(errc::invalid_argument, "patient_id must be 1-64 characters of [A-Za-z0-9_-]");
    }
    const auto& sex = record.demographics.sex;
    if (sex != "female" && sex != "male" && sex != "other" && sex != "unknown") {
        throw Error(errc::invalid_argument, "sex must be one of female, male, other, unknown");
    }
    if (!record.demographics.birth_date.empty()) {
        try {
            parse_date(record.demographics.birth_date);
        } catch (const Error&) {
            throw Error(errc::invalid_argument, "birth_date must be YYYY-MM-DD");
        }
    }
    for (std::size_t i = 1; i < record.encounters.size(); ++i) {
        if (record.encounters[i].timestamp_ms < record.encounters[i - 1].timestamp_ms) {
            throw Error(errc::invalid_argument, "encounter timestamps must be non-decreasing");
        }
    }
    for (std::size_t i = 1; i < record.screenings.size(); ++i) {
        if (record.screenings[i].timestamp_ms < record.screenings[i - 1].timestamp_ms) {
            throw Error(errc::invalid_argument, "screening timestamps must be non-decreasing");
        }
    }
    for (const auto& s : record.screenings) {
        if (!std::isfinite(s.predicted_hb_gdl) || !std::isfinite(s.latency_ms)) {
            throw Error(errc::invalid_argument, "screening numbers must be finite");
        }
        for (double v : s.features.values) {
            if (!std::isfinite(v)) throw Error(errc::invalid_argument, "feature values must be finite");
        }
    }
}

json to_json(const Screening& s) {
    json j = {
        {"timestamp", format_timestamp(s.timestamp_ms)},
        {"image_ref", s.image_ref},
        {"predicted_hb_gdl", s.predicted_hb_gdl},
        {"remark", s.remark},
        {"severity", s.severity},
        {"model_version", s.model_version},
        {"latency_ms", s.latency_ms},
    };
    if (!s.features.values.empty() || s.features.contract_version != 0) {
        j["features"] = {{"contract_version", s.features.contract_version}, {"values", s.features.values}};
    }
    return with_extra(std::move(j), s.extra);
}

json to_json(const PatientRecord& r) {
    json demo = with_extra({{"name", r.demographics.name},
                            {"birth_date", r.demographics.birth_date},
                            {"sex", r.demographics.sex},
                            {"contact", r.demographics.contact}},
                           r.demographics.extra);
    json encounters = json::array();
    for (const auto& e : r.encounters) {
        encounters.push_back(with_extra({{"timestamp", format_timestamp(e.timestamp_ms)}, {"notes", e.notes}}, e.extra));
    }
    json screenings = json::array();
    for (const auto& s : r.screenings) screenings.push_back(to_json(s));
    return with_extra({{"format", kRecordFormat},
                       {"patient_id", r.patient_id},
                       {"demographics", std::move(demo)},
                       {"encounters", std::move(encounters)},
                       {"screenings", std::move(screenings)}},
                      r.extra);
}

Screening screening_from_json(const json& j) { return screening_from(j, "screening"); }

PatientRecord record_from_json(const json& j) {
    Reader r(j, "record");
    const double format = r.num("format", kRecordFormat);
    if (format != kRecordFormat) {
        throw Error(errc::unknown_version, "unsupported record format " + std::to_string(static_cast<long long>(format)));
    }
    PatientRecord rec;
    rec.patient_id = r.str("patient_id", {}, true);

    Reader d(r.object("demographics"), "record.demographics");
    rec.demographics.name = d.str("name");
    rec.demographics.birth_date = d.str("birth_date");
    rec.demographics.sex = d.str("sex", "unknown");
    rec.demographics.contact = d.str("contact");
    rec.demographics.extra = d.rest();

    const json encounters = r.array("encounters");
    for (std::size_t i = 0; i < encounters.size(); ++i) {
        Reader e(encounters[i], "record.encounters[" + std::to_string(i) + "]");
        Encounter enc;
        enc.timestamp_ms = e.timestamp("timestamp");
        enc.notes = e.str("notes");
        enc.extra = e.rest();
        rec.encounters.push_back(std::move(enc));
    }
    const json screenings = r.array("screenings");
    for (std::size_t i = 0; i < screenings.size(); ++i) {
        rec.screenings.push_back(screening_from(screenings[i], "record.screenings[" + std::to_string(i) + "]"));
    }
    rec.extra = r.rest();
    validate(rec);
    return rec;
}

std::string canonical_bytes(const PatientRecord& record) { return to_json(record).dump(); }

PatientRecord parse_record(std::string_view canonical) {
    json j;
    try {
        j = json::parse(canonical);
    } catch (const json::exception& e) {
        throw Error(errc::parse, std::string("record is not valid JSON: ") + e.what());
    }
    return record_from_json(j);
}

} // namespace edgehr::vault
