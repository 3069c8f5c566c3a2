#include "edgehr/models/linear.hpp"

#include "edgehr/common/rng.hpp"
#include "edgehr/common/stats.hpp"
#include "edgehr/models/matrix.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace edgehr::models {

namespace {

struct Standardized {
    Eigen::MatrixXd z;
    Eigen::VectorXd y;
    std::vector<double> means;
    std::vector<double> scales;
    std::uint32_t contract = 0;
};

Standardized standardize(std::span<const balance::LabeledSample> data, std::size_t min_rows) {
    if (data.size() < min_rows) {
        throw Error(errc::invalid_argument, "linear training needs at least " + std::to_string(min_rows) + " samples");
    }
    const TrainingMatrix m = TrainingMatrix::from_samples(data);
    Standardized s;
    s.contract = data.front().features.contract_version;
    const auto n = static_cast<Eigen::Index>(m.rows);
    const auto d = static_cast<Eigen::Index>(m.cols);
    s.z.resize(n, d);
    s.y.resize(n);
    s.means.resize(m.cols);
    s.scales.resize(m.cols);
    for (std::size_t j = 0; j < m.cols; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) sum += m.at(i, j);
        const double mu = sum / static_cast<double>(m.rows);
        double ss = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) ss += (m.at(i, j) - mu) * (m.at(i, j) - mu);
        const double sd = std::sqrt(ss / static_cast<double>(m.rows));
        s.means[j] = mu;
        s.scales[j] = sd > 1e-12 * std::max(1.0, std::abs(mu)) ? sd : 1.0;
        for (std::size_t i = 0; i < m.rows; ++i) {
            s.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (m.at(i, j) - mu) / s.scales[j];
        }
    }
    for (std::size_t i = 0; i < m.rows; ++i) s.y(static_cast<Eigen::Index>(i)) = m.y[i];
    return s;
}

LinearModel make_model(const Standardized& s, LinearFamily family, const Eigen::VectorXd& w, double intercept) {
    LinearModel model;
    model.family = family;
    model.weights.assign(w.data(), w.data() + w.size());
    model.intercept = intercept;
    model.feature_means = s.means;
    model.feature_scales = s.scales;
    model.feature_contract_version = s.contract;
    return model;
}

// Minimizes sum omega_i (y_i - z_i^T w - b)^2 + lambda ||w||^2.
std::pair<Eigen::VectorXd, double> weighted_ridge(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                                                  const Eigen::VectorXd& omega, double lambda) {
    const double total = omega.sum();
    const Eigen::RowVectorXd zbar = (omega.transpose() * z) / total;
    const double ybar = omega.dot(y) / total;
    const Eigen::MatrixXd zc = z.rowwise() - zbar;
    const Eigen::VectorXd yc = y.array() - ybar;

    const Eigen::MatrixXd weighted = zc.array().colwise() * omega.array();
    Eigen::MatrixXd a = weighted.transpose() * zc;
    a.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = weighted.transpose() * yc;

    Eigen::VectorXd w;
    if (lambda > 0.0) {
        w = a.llt().solve(rhs);
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        qr.setThreshold(1e-10);
        if (qr.rank() < a.cols()) {
            throw Error(errc::degenerate, "normal equations are singular with lambda = 0; use lambda > 0");
        }
        w = qr.solve(rhs);
    }
    return {w, ybar - zbar.dot(w)};
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

} // namespace

std::string_view to_string(LinearFamily f) noexcept {
    switch (f) {
    case LinearFamily::ridge: return "ridge";
    case LinearFamily::lasso: return "lasso";
    case LinearFamily::elastic_net: return "elastic_net";
    case LinearFamily::huber: return "huber";
    case LinearFamily::ransac: return "ransac";
    case LinearFamily::mean: return "mean";
    }
    return "unknown";
}

double LinearModel::predict(std::span<const double> x) const {
    if (x.size() != weights.size()) {
        throw Error(errc::invalid_argument, "feature vector has " + std::to_string(x.size()) + " values, model expects " +
                                                std::to_string(weights.size()));
    }
    double out = intercept;
    for (std::size_t j = 0; j < x.size(); ++j) out += weights[j] * (x[j] - feature_means[j]) / feature_scales[j];
    return out;
}

LinearModel::RawForm LinearModel::destandardized() const {
    RawForm raw;
    raw.intercept = intercept;
    raw.weights.resize(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j) {
        raw.weights[j] = weights[j] / feature_scales[j];
        raw.intercept -= raw.weights[j] * feature_means[j];
    }
    return raw;
}

LinearModel train_ridge(std::span<const balance::LabeledSample> data, double lambda) {
    if (!(lambda >= 0.0)) throw Error(errc::invalid_argument, "ridge lambda must be non-negative");
    const Standardized s = standardize(data, 2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.y.size());
    const auto [w, b] = weighted_ridge(s.z, s.y, ones, lambda);
    LinearModel model = make_model(s, LinearFamily::ridge, w, b);
    model.lambda = lambda;
    return model;
}

LinearModel train_elastic_net(std::span<const balance::LabeledSample> data, double lambda, double l1_ratio,
                              std::vector<double>* objective_trace, std::size_t max_sweeps) {
    if (!(lambda > 0.0)) throw Error(errc::invalid_argument, "elastic net lambda must be positive");
    if (!(l1_ratio >= 0.0 && l1_ratio <= 1.0)) throw Error(errc::invalid_argument, "l1_ratio must be in [0,1]");
    const Standardized s = standardize(data, 2);
    const auto n = static_cast<double>(s.y.size());
    const auto d = s.z.cols();
    const double ybar = s.y.mean();

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd r = s.y.array() - ybar;
    Eigen::VectorXd col_sq(d);
    for (Eigen::Index j = 0; j < d; ++j) col_sq(j) = s.z.col(j).squaredNorm() / n;

    const double l1 = lambda * l1_ratio;
    const double l2 = lambda * (1.0 - l1_ratio);
    auto objective = [&] { return r.squaredNorm() / (2.0 * n) + l1 * w.lpNorm<1>() + 0.5 * l2 * w.squaredNorm(); };

    const LinearFamily family = l1_ratio == 1.0 ? LinearFamily::lasso : LinearFamily::elastic_net;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double denom = col_sq(j) + l2;
            if (denom <= 0.0) continue;
            const double old = w(j);
            const double rho = s.z.col(j).dot(r) / n + col_sq(j) * old;
            const double updated = soft_threshold(rho, l1) / denom;
            if (updated != old) {
                r -= s.z.col(j) * (updated - old);
                w(j) = updated;
                max_change = std::max(max_change, std::abs(updated - old));
            }
        }
        if (objective_trace) objective_trace->push_back(objective());
        if (max_change < kCoefficientTolerance) {
            LinearModel model = make_model(s, family, w, ybar);
            model.lambda = lambda;
            model.l1_ratio = l1_ratio;
            return model;
        }
    }
    LinearModel last = make_model(s, family, w, ybar);
    last.lambda = lambda;
    last.l1_ratio = l1_ratio;
    throw ConvergenceError("coordinate descent did not converge in " + std::to_string(max_sweeps) + " sweeps",
                           std::move(last));
}

LinearModel train_huber(std::span<const balance::LabeledSample> data, double delta, double lambda) {
    if (!(delta > 0.0)) throw Error(errc::invalid_argument, "huber delta must be positive");
    if (!(lambda >= 0.0)) throw Error(errc::invalid_argument, "huber lambda must be non-negative");
    const Standardized s = standardize(data, 2);
    Eigen::VectorXd omega = Eigen::VectorXd::Ones(s.y.size());
    auto [w, b] = weighted_ridge(s.z, s.y, omega, lambda);

    auto finish = [&](const Eigen::VectorXd& weights, double intercept) {
        LinearModel model = make_model(s, LinearFamily::huber, weights, intercept);
        model.delta = delta;
        model.lambda = lambda;
        return model;
    };

    for (std::size_t it = 0; it < kMaxIrlsIterations; ++it) {
        const Eigen::VectorXd r = (s.y - s.z * w).array() - b;
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            const double a = std::abs(r(i));
            omega(i) = a <= delta ? 1.0 : delta / a;
        }
        auto [w_next, b_next] = weighted_ridge(s.z, s.y, omega, lambda);
        const double change = std::max((w_next - w).lpNorm<Eigen::Infinity>(), std::abs(b_next - b));
        w = std::move(w_next);
        b = b_next;
        if (change < kCoefficientTolerance) return finish(w, b);
    }
    throw ConvergenceError("huber IRLS did not converge in " + std::to_string(kMaxIrlsIterations) + " iterations",
                           finish(w, b));
}

LinearModel train_ransac(std::span<const balance::LabeledSample> data, const LinearTrainer& base,
                         const RansacParams& params) {
    if (params.n_iters < 1) throw Error(errc::invalid_argument, "ransac needs at least one iteration");
    if (data.empty()) throw Error(errc::invalid_argument, "ransac training data is empty");
    const std::size_t n = data.size();
    const std::size_t m = params.min_samples > 0 ? params.min_samples : data.front().features.values.size() + 1;
    if (n < m) {
        throw Error(errc::invalid_argument, "ransac needs at least " + std::to_string(m) + " samples, got " + std::to_string(n));
    }

    double threshold = params.inlier_threshold;
    if (!(threshold > 0.0)) {
        std::vector<double> y;
        for (const auto& s : data) y.push_back(s.hb_gdl);
        const double med = stats::percentile(y, 0.5);
        for (double& v : y) v = std::abs(v - med);
        threshold = stats::percentile(y, 0.5);
    }

    Rng rng(params.seed);
    std::vector<std::size_t> order(n);
    std::vector<balance::LabeledSample> subset;
    std::vector<std::size_t> best_inliers;

    for (std::size_t it = 0; it < params.n_iters; ++it) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = 0; i < m; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(n - i));
            std::swap(order[i], order[j]);
        }
        subset.clear();
        for (std::size_t i = 0; i < m; ++i) subset.push_back(data[order[i]]);

        LinearModel candidate;
        try {
            candidate = base(subset);
        } catch (const Error&) {
            continue;
        }
        std::vector<std::size_t> inliers;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(data[i].hb_gdl - candidate.predict(data[i].features.values)) <= threshold) {
                inliers.push_back(i);
            }
        }
        if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
    }

    if (best_inliers.empty()) throw Error(errc::degenerate, "ransac found no consensus set");
    subset.clear();
    for (std::size_t i : best_inliers) subset.push_back(data[i]);
    LinearModel model = base(subset);
    model.family = LinearFamily::ransac;
    return model;
}

LinearModel train_mean(std::span<const balance::LabeledSample> data) {
    const TrainingMatrix m = TrainingMatrix::from_samples(data);
    LinearModel model;
    model.family = LinearFamily::mean;
    model.weights.assign(m.cols, 0.0);
    model.feature_means.assign(m.cols, 0.0);
    model.feature_scales.assign(m.cols, 1.0);
    model.intercept = std::accumulate(m.y.begin(), m.y.end(), 0.0) / static_cast<double>(m.rows);
    model.feature_contract_version = data.front().features.contract_version;
    return model;
}

} // namespace edgehr::models
