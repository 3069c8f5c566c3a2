#pragma once

#include "edgehr/imaging/features.hpp"
#include "edgehr/imaging/image.hpp"
#include "edgehr/models/model.hpp"
#include "edgehr/vault/store.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace edgehr::service {

/// Exactly one of `image` (with `annotations`) or `features` is set.
struct ScreeningRequest {
    std::string patient_id;
    std::optional<imaging::ImageBuffer> image;
    std::vector<imaging::BoundingBox> annotations;
    std::optional<imaging::FeatureVector> features;
    /// Free-form reference to the source image (file name); never the pixels.
    std::string image_ref;
    /// Empty accepts whatever model is loaded.
    std::string model_version;
};

struct ScreeningResult {
    double predicted_hb_gdl = 0.0;
    std::string remark;
    std::string severity;
    std::string model_version;
    double latency_ms = 0.0;
    std::int64_t timestamp_ms = 0;
    std::vector<std::string> warnings;
};

struct LoadedModel {
    models::Model model;
    std::string version;

    static LoadedModel from_file(const std::filesystem::path& path);
};

nlohmann::json to_json(const ScreeningResult& r);
ScreeningResult result_of(const vault::Screening& s);

/// Predictions are clamped into the labeler's open sanity interval before
/// labeling, so a wild model output still gets a consistent label.
double clamp_prediction(double hb) noexcept;

/// Imaging (when an image is given), prediction and labeling without
/// touching a store. Imaging failures surface as imaging::StageError;
/// a requested model version that differs from the loaded one is
/// errc::unknown_version. `features_out` receives the vector that was scored.
ScreeningResult screen(const ScreeningRequest& request, const LoadedModel& model, std::int64_t now_ms,
                       imaging::FeatureVector* features_out = nullptr);

/// screen() followed by appending the result to the patient's record. The
/// append retries on a concurrent revision bump; errc::not_found for an
/// unknown patient.
ScreeningResult run_screening(const ScreeningRequest& request, const LoadedModel& model, vault::Store& store,
                              const std::function<std::int64_t()>& clock);

} // namespace edgehr::service
