#include "edgehr/service/screening.hpp"

#include "edgehr/balance/labels.hpp"
#include "edgehr/common/error.hpp"
#include "edgehr/common/time.hpp"
#include "edgehr/imaging/stage_error.hpp"

#include <algorithm>
#include <chrono>

namespace edgehr::service {

LoadedModel LoadedModel::from_file(const std::filesystem::path& path) {
    LoadedModel m{models::load_model(path), {}};
    m.version = models::model_version(m.model);
    return m;
}

nlohmann::json to_json(const ScreeningResult& r) {
    return {{"predicted_hb_gdl", r.predicted_hb_gdl},
            {"remark", r.remark},
            {"severity", r.severity},
            {"model_version", r.model_version},
            {"latency_ms", r.latency_ms},
            {"timestamp", format_timestamp(r.timestamp_ms)},
            {"warnings", r.warnings}};
}

ScreeningResult result_of(const vault::Screening& s) {
    ScreeningResult r;
    r.predicted_hb_gdl = s.predicted_hb_gdl;
    r.remark = s.remark;
    r.severity = s.severity;
    r.model_version = s.model_version;
    r.latency_ms = s.latency_ms;
    r.timestamp_ms = s.timestamp_ms;
    if (s.extra.contains("warnings")) r.warnings = s.extra.at("warnings").get<std::vector<std::string>>();
    return r;
}

double clamp_prediction(double hb) noexcept { return std::clamp(hb, 0.01, 24.99); }

ScreeningResult screen(const ScreeningRequest& request, const LoadedModel& model, std::int64_t now_ms,
                       imaging::FeatureVector* features_out) {
    const auto start = std::chrono::steady_clock::now();
    if (request.image.has_value() == request.features.has_value()) {
        throw Error(errc::invalid_argument, "a screening needs either an image with annotations or a feature vector");
    }
    if (!request.model_version.empty() && request.model_version != model.version) {
        throw Error(errc::unknown_version,
                    "requested model " + request.model_version + " but " + model.version + " is loaded");
    }

    ScreeningResult result;
    imaging::FeatureVector features;
    if (request.image) {
        features = imaging::features_from_image(*request.image, request.annotations, &result.warnings);
    } else {
        features = *request.features;
    }
    double hb = 0.0;
    try {
        hb = models::predict(model.model, features);
    } catch (const imaging::StageError&) {
        throw;
    } catch (const Error& e) {
        throw imaging::StageError(e.code(), "predict", e.what());
    }
    result.predicted_hb_gdl = clamp_prediction(hb);
    result.remark = std::string(balance::to_string(balance::remark_of(result.predicted_hb_gdl)));
    result.severity = std::string(balance::to_string(balance::severity_of(result.predicted_hb_gdl)));
    result.model_version = model.version;
    result.timestamp_ms = now_ms;
    result.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (features_out) *features_out = std::move(features);
    return result;
}

ScreeningResult run_screening(const ScreeningRequest& request, const LoadedModel& model, vault::Store& store,
                              const std::function<std::int64_t()>& clock) {
    const auto start = std::chrono::steady_clock::now();
    // Fail fast on unknown patients before spending time on imaging.
    store.get(request.patient_id);

    imaging::FeatureVector features;
    ScreeningResult result = screen(request, model, clock(), &features);

    for (int attempt = 0;; ++attempt) {
        const auto current = store.get_version(request.patient_id);
        if (current.meta.deleted || !current.record) throw Error(errc::not_found, "unknown patient");
        vault::PatientRecord record = *current.record;
        if (!record.screenings.empty()) {
            result.timestamp_ms = std::max(result.timestamp_ms, record.screenings.back().timestamp_ms);
        }
        vault::Screening s;
        s.timestamp_ms = result.timestamp_ms;
        s.image_ref = request.image_ref;
        s.features = features;
        s.predicted_hb_gdl = result.predicted_hb_gdl;
        s.remark = result.remark;
        s.severity = result.severity;
        s.model_version = result.model_version;
        result.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        s.latency_ms = result.latency_ms;
        if (!result.warnings.empty()) s.extra["warnings"] = result.warnings;
        record.screenings.push_back(std::move(s));
        try {
            store.put(record, current.meta.revision);
            return result;
        } catch (const Error& e) {
            if (e.code() != errc::conflict || attempt >= 8) throw;
        }
    }
}

} // namespace edgehr::service
