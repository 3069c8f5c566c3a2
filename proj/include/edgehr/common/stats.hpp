#pragma once

#include <span>

namespace edgehr::stats {

double mean(std::span<const double> values);

/// Sample standard deviation (n - 1 denominator). Requires n >= 2.
double sample_stddev(std::span<const double> values);

/// Linear interpolation between closest ranks: position q * (n - 1) in the
/// sorted values. q in [0, 1]; values need not be sorted.
double percentile(std::span<const double> values, double q);

/// Same as percentile() for input already sorted ascending.
double percentile_sorted(std::span<const double> sorted, double q);

} // namespace edgehr::stats
