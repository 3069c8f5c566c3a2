/**
 * @file model.hpp
 * @brief Trained-model variant, prediction dispatch and the model file format.
 *
 * File layout (all integers and doubles little-endian, doubles as IEEE-754
 * bit patterns):
 *
 *   magic "EHRM" | u16 format version (1) | u8 kind (0 forest, 1 gbm,
 *   2 linear) | u32 feature contract version | u32 feature count | body |
 *   u64 FNV-1a of every preceding byte
 *
 * docs/model_format.md spells out each body.
 */

#pragma once

#include "edgehr/imaging/features.hpp"
#include "edgehr/models/linear.hpp"
#include "edgehr/models/tree.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace edgehr::models {

inline constexpr std::uint16_t kModelFormatVersion = 1;

using Model = std::variant<ForestModel, GbmModel, LinearModel>;

/// Throws errc::unknown_version when the feature contract differs from the
/// model's, errc::invalid_argument on length mismatch or non-finite output.
double predict(const Model& model, const imaging::FeatureVector& features);

std::uint32_t feature_contract_version(const Model& model);
std::size_t feature_count(const Model& model);

/// Short family name: rf, gbm, ridge, lasso, elastic_net, huber, ransac, mean.
std::string family_name(const Model& model);

std::vector<std::uint8_t> serialize_model(const Model& model);

/// Throws errc::unknown_version on a foreign format version and
/// errc::corruption on a bad magic, checksum, truncation or invalid structure.
Model deserialize_model(std::span<const std::uint8_t> bytes);

/// "<family>-<first 12 hex digits of the payload checksum>".
std::string model_version(const Model& model);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

} // namespace edgehr::models
