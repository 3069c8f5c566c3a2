#pragma once

#include "edgehr/balance/labels.hpp"

#include <span>
#include <string>
#include <vector>

namespace edgehr::eval {

double rmse(std::span<const double> y_true, std::span<const double> y_pred);
double mae(std::span<const double> y_true, std::span<const double> y_pred);

/// Class indices of predicted hemoglobin under a labeler (see
/// balance::class_index). Predictions are clamped into the labeler's sanity
/// bound first, so a wild regression output still lands in a class.
std::vector<int> classify_from_hb(std::span<const double> y_pred, balance::LabelMode mode);

struct ConfusionMatrix {
    std::vector<std::string> labels;
    /// counts[true][predicted]
    std::vector<std::vector<std::size_t>> counts;

    std::size_t total() const;
    std::string to_csv() const;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, balance::LabelMode mode);

struct BinaryMetrics {
    double sensitivity = 0.0;
    double specificity = 0.0;
};

/// Anemic is the positive class: index 0 of a remark matrix, and every
/// index other than non_anemic (0) of a severity matrix (one-vs-rest
/// pooling). Zero denominators raise errc::undefined_metric.
BinaryMetrics binary_metrics(const ConfusionMatrix& cm, balance::LabelMode mode);

/// Explicit 2x2 form with anemic positive.
BinaryMetrics binary_metrics(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp);

struct BlandAltman {
    double bias = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// diffs = pred - true; limits bias -/+ 1.96 * sample stddev(diffs).
BlandAltman bland_altman(std::span<const double> y_true, std::span<const double> y_pred);

} // namespace edgehr::eval
