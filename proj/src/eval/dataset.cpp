#include "edgehr/eval/dataset.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/rng.hpp"
#include "edgehr/imaging/annotations.hpp"
#include "edgehr/imaging/codec.hpp"
#include "edgehr/imaging/features.hpp"
#include "edgehr/imaging/stage_error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace edgehr::eval {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kManifestHeader = "image_path,annotation_path,hb_gdl";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Splits one CSV line, honouring double-quoted fields with "" escapes.
std::vector<std::string> split_csv(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw Error(errc::parse, "manifest line " + std::to_string(line_no) + ": unterminated quote");
    fields.emplace_back(trim(cur));
    return fields;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::vector<ManifestRow> parse_manifest(const std::string& text, const fs::path& base_dir) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<ManifestRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        if (!header_seen) {
            if (t != kManifestHeader) {
                throw Error(errc::parse, "manifest line " + std::to_string(line_no) + ": expected header '" +
                                             std::string(kManifestHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        const auto fields = split_csv(t, line_no);
        if (fields.size() != 3) {
            throw Error(errc::parse, "manifest line " + std::to_string(line_no) + ": expected 3 fields, got " +
                                         std::to_string(fields.size()));
        }
        ManifestRow row;
        double hb = 0.0;
        const auto& f = fields[2];
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), hb);
        if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(hb)) {
            throw Error(errc::parse, "manifest line " + std::to_string(line_no) + ": bad hb_gdl '" + f + "'");
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw Error(errc::parse, "manifest line " + std::to_string(line_no) + ": empty path");
        }
        row.image_path = fs::path(fields[0]).is_absolute() ? fs::path(fields[0]) : base_dir / fields[0];
        row.annotation_path = fs::path(fields[1]).is_absolute() ? fs::path(fields[1]) : base_dir / fields[1];
        row.hb_gdl = hb;
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw Error(errc::parse, "manifest is empty");
    return rows;
}

std::vector<ManifestRow> read_manifest(const fs::path& manifest) {
    return parse_manifest(read_text(manifest), manifest.parent_path());
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
    std::ostringstream out;
    out << kManifestHeader << '\n';
    char hb[32];
    for (const auto& r : rows) {
        std::snprintf(hb, sizeof hb, "%.17g", r.hb_gdl);
        out << csv_field(r.image_path.generic_string()) << ',' << csv_field(r.annotation_path.generic_string()) << ','
            << hb << '\n';
    }
    return out.str();
}

Dataset load_dataset(const fs::path& manifest) {
    Dataset ds;
    ds.rows = read_manifest(manifest);
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        const auto& row = ds.rows[i];
        try {
            balance::check_hb(row.hb_gdl);
        } catch (const Error& e) {
            ds.issues.push_back({i, "label", e.what()});
            continue;
        }
        try {
            const auto image = imaging::load_image(row.image_path);
            std::vector<imaging::BoundingBox> boxes;
            try {
                boxes = imaging::parse_annotations(read_text(row.annotation_path));
            } catch (const Error& e) {
                ds.issues.push_back({i, "annotation", e.what()});
                continue;
            }
            std::vector<std::string> warnings;
            balance::LabeledSample s;
            s.features = imaging::features_from_image(image, boxes, &warnings);
            s.hb_gdl = row.hb_gdl;
            s.id = i;
            for (auto& w : warnings) ds.issues.push_back({i, "warning", std::move(w)});
            ds.samples.push_back(std::move(s));
        } catch (const imaging::StageError& e) {
            ds.issues.push_back({i, e.stage(), e.what()});
        } catch (const Error& e) {
            ds.issues.push_back({i, e.code() == errc::io ? "io" : "decode", e.what()});
        }
    }
    return ds;
}

double synthetic_hb_function(double x0, double x1, double x2, double x3, double x4) {
    return 13.0 + 1.8 * std::sin(1.4 * x0) + 0.9 * (x1 * x1 - 4.0 / 3.0) + 0.7 * x2 * x3 - 1.2 * (std::abs(x4) - 1.0);
}

std::vector<balance::LabeledSample> synthetic_benchmark(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<balance::LabeledSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        balance::LabeledSample s;
        s.features.contract_version = imaging::kFeatureContractVersion;
        s.features.values.resize(imaging::kFeatureCount);
        auto& x = s.features.values;
        for (std::size_t j = 0; j < 5; ++j) x[j] = -2.0 + 4.0 * rng.uniform01();
        // The remaining columns are noisy copies, the way real color
        // statistics of one region move together.
        for (std::size_t j = 5; j < x.size(); ++j) x[j] = x[j % 5] + 0.5 * rng.normal();
        const double hb = synthetic_hb_function(x[0], x[1], x[2], x[3], x[4]) + 0.6 * rng.normal();
        s.hb_gdl = std::clamp(hb, 3.0, 19.0);
        s.id = i;
        out.push_back(std::move(s));
    }
    return out;
}

fs::path write_synthetic_image_dataset(const fs::path& dir, std::size_t n, std::uint64_t seed) {
    using imaging::BoundingBox;
    using imaging::RegionClass;
    constexpr int kW = 64, kH = 48;

    fs::create_directories(dir);
    Rng rng(seed);
    auto channel = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };

    std::vector<ManifestRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        const double hb = std::clamp(13.0 + 2.2 * rng.normal(), 5.0, 18.0);
        // Nail beds whiten (green and blue rise) as hemoglobin falls.
        const double t = std::clamp((hb - 6.0) / 10.0, 0.0, 1.0);
        const double subject = 6.0 * rng.normal();
        const double nail[3] = {225.0 - 15.0 * t + subject, 200.0 - 90.0 * t + subject, 195.0 - 75.0 * t + subject};
        const double skin[3] = {200.0 + subject, 150.0 + 0.5 * subject, 125.0 + 0.5 * subject};
        const double gain[3] = {0.7 + 0.3 * rng.uniform01(), 0.7 + 0.3 * rng.uniform01(), 0.7 + 0.3 * rng.uniform01()};

        imaging::ImageBuffer img(kW, kH);
        for (int y = 0; y < kH; ++y) {
            for (int x = 0; x < kW; ++x) {
                const double* base = skin;
                double white[3] = {250.0, 250.0, 250.0};
                if (x < 16 && y < 16) base = white;
                else if (x >= 28 && x < 52 && y >= 14 && y < 38) base = nail;
                auto& px = img.at(x, y);
                const double noise = base == white ? 0.0 : 4.0;
                px.r = channel(base[0] * gain[0] + noise * rng.normal());
                px.g = channel(base[1] * gain[1] + noise * rng.normal());
                px.b = channel(base[2] * gain[2] + noise * rng.normal());
            }
        }

        std::vector<BoundingBox> boxes{
            {RegionClass::reference, 8.0 / kW, 8.0 / kH, 12.0 / kW, 12.0 / kH},
            {RegionClass::nail, 40.0 / kW, 26.0 / kH, 18.0 / kW, 18.0 / kH},
        };
        // Every tenth image omits the skin box so loaders see the mirroring path.
        if (i % 10 != 9) boxes.push_back({RegionClass::skin, 12.0 / kW, 36.0 / kH, 16.0 / kW, 12.0 / kH});

        char stem[32];
        std::snprintf(stem, sizeof stem, "img_%03zu", i);
        imaging::save_ppm(img, dir / (std::string(stem) + ".ppm"));
        std::ofstream(dir / (std::string(stem) + ".txt"), std::ios::binary) << imaging::format_annotations(boxes);
        rows.push_back({std::string(stem) + ".ppm", std::string(stem) + ".txt", hb});
    }
    const fs::path manifest = dir / "manifest.csv";
    std::ofstream(manifest, std::ios::binary) << format_manifest(rows);
    return manifest;
}

} // namespace edgehr::eval
