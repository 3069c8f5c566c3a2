#include "edgehr/balance/kde.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/rng.hpp"
#include "edgehr/common/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace edgehr::balance {

double kde_density(std::span<const double> values, double bandwidth, double x) {
    if (values.empty()) throw Error(errc::invalid_argument, "kde needs at least one value");
    if (!(bandwidth > 0.0)) throw Error(errc::invalid_argument, "kde bandwidth must be positive");
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    double sum = 0.0;
    for (double v : values) {
        const double z = (x - v) / bandwidth;
        sum += norm * std::exp(-0.5 * z * z);
    }
    return sum / (static_cast<double>(values.size()) * bandwidth);
}

double silverman_bandwidth(std::span<const double> values) {
    if (values.size() < 2) throw Error(errc::invalid_argument, "bandwidth needs at least two values");
    const double sigma = stats::sample_stddev(values);
    if (!(sigma > 0.0)) throw Error(errc::degenerate, "bandwidth undefined for constant values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = stats::percentile_sorted(sorted, 0.75) - stats::percentile_sorted(sorted, 0.25);
    const double scale = iqr > 0.0 ? std::min(sigma, iqr / 1.34) : sigma;
    return 0.9 * scale * std::pow(static_cast<double>(values.size()), -0.2);
}

BalanceResult kde_undersample(std::span<const LabeledSample> samples, LabelMode mode, std::uint64_t seed) {
    const int k = class_count(mode);
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        members[static_cast<std::size_t>(class_index(mode, samples[i].hb_gdl))].push_back(i);
    }

    BalanceResult result;
    result.report.mode = mode;
    result.report.seed = seed;
    std::size_t target = std::numeric_limits<std::size_t>::max();
    for (int c = 0; c < k; ++c) {
        if (members[static_cast<std::size_t>(c)].empty()) {
            throw Error(errc::invalid_argument, "class '" + std::string(class_name(mode, c)) + "' has no samples");
        }
        target = std::min(target, members[static_cast<std::size_t>(c)].size());
    }

    std::vector<std::size_t> kept;
    for (int c = 0; c < k; ++c) {
        const auto& idx = members[static_cast<std::size_t>(c)];
        ClassBalance cb{std::string(class_name(mode, c)), idx.size(), target, 0.0};

        if (idx.size() == target) {
            kept.insert(kept.end(), idx.begin(), idx.end());
        } else {
            std::vector<double> hb;
            hb.reserve(idx.size());
            for (std::size_t i : idx) hb.push_back(samples[i].hb_gdl);

            const bool constant = std::all_of(hb.begin(), hb.end(), [&](double v) { return v == hb.front(); });
            if (!constant) cb.bandwidth = silverman_bandwidth(hb);

            // log key = log(u) / w with w = 1 / density, i.e. density * log(u).
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
            std::vector<std::pair<double, std::size_t>> keyed;
            keyed.reserve(idx.size());
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const double density = constant ? 1.0 : kde_density(hb, cb.bandwidth, hb[j]);
                const double u = rng.uniform01();
                const double key = u > 0.0 ? density * std::log(u) : -std::numeric_limits<double>::infinity();
                keyed.emplace_back(key, idx[j]);
            }
            std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
            for (std::size_t j = 0; j < target; ++j) kept.push_back(keyed[j].second);
        }
        result.report.classes.push_back(std::move(cb));
    }

    std::sort(kept.begin(), kept.end());
    result.kept_positions = kept;
    result.samples.reserve(kept.size());
    for (std::size_t i : kept) result.samples.push_back(samples[i]);
    return result;
}

std::string BalanceReport::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "class,before,after,bandwidth,seed\n";
    for (const auto& c : classes) {
        out << c.name << ',' << c.before << ',' << c.after << ',' << c.bandwidth << ',' << seed << '\n';
    }
    return out.str();
}

std::string BalanceReport::to_json() const {
    nlohmann::json j;
    j["mode"] = std::string(to_string(mode));
    j["seed"] = seed;
    j["classes"] = nlohmann::json::array();
    for (const auto& c : classes) {
        j["classes"].push_back({{"class", c.name}, {"before", c.before}, {"after", c.after}, {"bandwidth", c.bandwidth}});
    }
    return j.dump();
}

} // namespace edgehr::balance
