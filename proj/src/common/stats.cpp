#include "edgehr/common/stats.hpp"

#include "edgehr/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace edgehr::stats {

double mean(std::span<const double> values) {
    if (values.empty()) throw Error(errc::invalid_argument, "mean of empty sequence");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_stddev(std::span<const double> values) {
    if (values.size() < 2) throw Error(errc::invalid_argument, "sample stddev needs at least two values");
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw Error(errc::invalid_argument, "percentile of empty sequence");
    if (!(q >= 0.0 && q <= 1.0)) throw Error(errc::range, "percentile fraction outside [0,1]");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double percentile(std::span<const double> values, double q) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return percentile_sorted(sorted, q);
}

} // namespace edgehr::stats
