/**
 * @file dataset.hpp
 * @brief Dataset manifests and their conversion into labeled samples.
 *
 * A manifest is CSV with the header `image_path,annotation_path,hb_gdl`.
 * Relative paths resolve against the manifest's directory. The row index
 * (0-based, header excluded) becomes the sample id.
 */

#pragma once

#include "edgehr/balance/labels.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace edgehr::eval {

struct ManifestRow {
    std::filesystem::path image_path;
    std::filesystem::path annotation_path;
    double hb_gdl = 0.0;
};

/// Throws errc::parse on a bad header or row (with line number).
std::vector<ManifestRow> parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});
std::vector<ManifestRow> read_manifest(const std::filesystem::path& manifest);

std::string format_manifest(const std::vector<ManifestRow>& rows);

struct DatasetIssue {
    std::size_t row = 0;
    std::string stage;
    std::string message;
};

struct Dataset {
    std::vector<balance::LabeledSample> samples;
    std::vector<ManifestRow> rows;
    std::vector<DatasetIssue> issues;
};

/// Loads every row; rows that fail (decode, annotation, imaging, hb bound)
/// are reported as issues and skipped. Warnings such as mirrored skin
/// features are reported as issues with stage "warning" but keep the row.
Dataset load_dataset(const std::filesystem::path& manifest);

/// Synthetic fingernail photographs whose nail-bed color pales as hb drops,
/// under a random illuminant that the white reference patch recovers.
/// Writes `<dir>/img_NNN.ppm`, `<dir>/img_NNN.txt` and `<dir>/manifest.csv`.
std::filesystem::path write_synthetic_image_dataset(const std::filesystem::path& dir, std::size_t n,
                                                    std::uint64_t seed);

/// Hemoglobin as a smooth nonlinear function of five features plus
/// Gaussian noise (sd 0.6 g/dL), clipped into (3, 19). Features 0..4 are
/// U(-2, 2); feature j >= 5 is feature j mod 5 plus N(0, 0.5) noise.
std::vector<balance::LabeledSample> synthetic_benchmark(std::size_t n, std::uint64_t seed);

double synthetic_hb_function(double x0, double x1, double x2, double x3, double x4);

} // namespace edgehr::eval
