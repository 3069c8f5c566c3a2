#pragma once

#include "edgehr/balance/labels.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace edgehr::models {

/// Dense row-major design matrix with targets, built from labeled samples.
struct TrainingMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> x;
    std::vector<double> y;

    std::span<const double> row(std::size_t i) const { return {x.data() + i * cols, cols}; }
    double at(std::size_t i, std::size_t j) const { return x[i * cols + j]; }

    /// Throws errc::invalid_argument on empty input or ragged feature vectors.
    static TrainingMatrix from_samples(std::span<const balance::LabeledSample> samples);
};

} // namespace edgehr::models
