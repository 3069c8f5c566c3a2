#pragma once

#include "edgehr/balance/labels.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace edgehr::balance {

/// Gaussian kernel density (1/(n h)) sum phi((x - v_i) / h).
double kde_density(std::span<const double> values, double bandwidth, double x);

/// Silverman's rule 0.9 min(sigma, IQR / 1.34) n^(-1/5), sigma the sample
/// standard deviation. When IQR is zero but sigma is not, sigma alone is used.
double silverman_bandwidth(std::span<const double> values);

struct ClassBalance {
    std::string name;
    std::size_t before = 0;
    std::size_t after = 0;
    /// Silverman bandwidth over the class's hb values; 0 when the class was
    /// kept whole or its values were constant (uniform weights).
    double bandwidth = 0.0;
};

struct BalanceReport {
    LabelMode mode = LabelMode::remark;
    std::uint64_t seed = 0;
    std::vector<ClassBalance> classes;

    std::string to_csv() const;
    std::string to_json() const;
};

struct BalanceResult {
    std::vector<LabeledSample> samples;
    /// Positions of the kept samples in the input, ascending.
    std::vector<std::size_t> kept_positions;
    BalanceReport report;
};

/// KDE-weighted undersampling. Every class is cut to the smallest class
/// size. Inside a larger class each sample gets weight 1 / density(hb) with
/// the density estimated over that class, and the target count is drawn
/// without replacement by Efraimidis-Spirakis keys u^(1/w) (the largest
/// keys win), u from Rng(derive_seed(seed, class index)). Output keeps
/// input order.
BalanceResult kde_undersample(std::span<const LabeledSample> samples, LabelMode mode, std::uint64_t seed);

} // namespace edgehr::balance
