/**
 * @file linear.hpp
 * @brief Linear hemoglobin regressors on standardized features.
 *
 * All trainers standardize each feature to zero mean and unit population
 * deviation (constant features get scale 1) and fit an unpenalized
 * intercept. Penalties act on the standardized weights.
 *
 * Objectives:
 * - ridge:        ||y - Xw - b||^2 + lambda ||w||^2
 * - elastic net:  (1/2n) ||y - Xw - b||^2
 *                 + lambda (l1_ratio ||w||_1 + (1 - l1_ratio)/2 ||w||^2)
 *                 (lasso is l1_ratio = 1; l1_ratio = 0 equals ridge with
 *                 lambda_ridge = n lambda)
 * - huber:        sum H_delta(r_i) + lambda ||w||^2 with H(r) = r^2 for
 *                 |r| <= delta and 2 delta |r| - delta^2 beyond
 */

#pragma once

#include "edgehr/balance/labels.hpp"
#include "edgehr/common/error.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace edgehr::models {

enum class LinearFamily : std::uint8_t { ridge = 0, lasso = 1, elastic_net = 2, huber = 3, ransac = 4, mean = 5 };

std::string_view to_string(LinearFamily f) noexcept;

struct LinearModel {
    LinearFamily family = LinearFamily::ridge;
    /// Weights in standardized feature space.
    std::vector<double> weights;
    double intercept = 0.0;
    std::vector<double> feature_means;
    std::vector<double> feature_scales;
    double lambda = 0.0;
    double l1_ratio = 0.0;
    double delta = 0.0;
    std::uint32_t feature_contract_version = 0;

    std::size_t n_features() const noexcept { return weights.size(); }

    /// w^T standardize(x) + intercept.
    double predict(std::span<const double> x) const;

    struct RawForm {
        std::vector<double> weights;
        double intercept = 0.0;
    };
    /// Equivalent weights and intercept on unstandardized features.
    RawForm destandardized() const;
};

/// Raised when an iterative solver hits its iteration cap; carries the last iterate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& message, LinearModel last)
        : Error(errc::convergence, message), last_(std::move(last)) {}
    const LinearModel& last_iterate() const noexcept { return last_; }

private:
    LinearModel last_;
};

inline constexpr double kCoefficientTolerance = 1e-6;
inline constexpr std::size_t kMaxSweeps = 10'000;
inline constexpr std::size_t kMaxIrlsIterations = 1'000;

/// Normal equations. With lambda = 0 a rank-deficient system throws
/// errc::degenerate advising lambda > 0.
LinearModel train_ridge(std::span<const balance::LabeledSample> data, double lambda);

/// Cyclic coordinate descent with soft-thresholding; converged when the
/// largest coefficient change in a sweep is below 1e-6. When
/// `objective_trace` is given, the objective after every sweep is appended.
LinearModel train_elastic_net(std::span<const balance::LabeledSample> data, double lambda, double l1_ratio,
                              std::vector<double>* objective_trace = nullptr, std::size_t max_sweeps = kMaxSweeps);

inline LinearModel train_lasso(std::span<const balance::LabeledSample> data, double lambda,
                               std::vector<double>* objective_trace = nullptr) {
    return train_elastic_net(data, lambda, 1.0, objective_trace);
}

/// Iteratively reweighted least squares starting from the ridge fit.
LinearModel train_huber(std::span<const balance::LabeledSample> data, double delta, double lambda);

using LinearTrainer = std::function<LinearModel(std::span<const balance::LabeledSample>)>;

struct RansacParams {
    std::size_t n_iters = 100;
    /// |residual| <= threshold (g/dL) counts as an inlier. A value <= 0
    /// means the median absolute deviation of the training targets.
    double inlier_threshold = 1.0;
    /// Minimal subset size; 0 means n_features + 1.
    std::size_t min_samples = 0;
    std::uint64_t seed = 0;
};

/// Each iteration fits `base` on a random minimal subset (Rng(seed), partial
/// Fisher-Yates) and counts inliers over all data; the first subset with
/// the most inliers wins and `base` is refit on its inliers. Subsets on
/// which `base` throws are skipped; an empty best consensus set throws
/// errc::degenerate.
LinearModel train_ransac(std::span<const balance::LabeledSample> data, const LinearTrainer& base,
                         const RansacParams& params);

/// Constant predictor at mean(y); baseline for model surveys.
LinearModel train_mean(std::span<const balance::LabeledSample> data);

} // namespace edgehr::models
