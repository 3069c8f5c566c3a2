#include "edgehr/models/tree.hpp"

#include "edgehr/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

namespace edgehr::models {

namespace {

struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const TrainingMatrix& m, std::span<const double> targets, const TreeParams& params, Rng& rng)
        : m_(m), y_(targets), params_(params), rng_(rng),
          k_(features_per_node(m.cols, params.features_per_split)) {}

    RegressionTree build(std::vector<std::size_t> rows) {
        tree_.max_depth = params_.max_depth;
        grow(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    std::int32_t grow(std::vector<std::size_t> rows, int depth) {
        const auto id = static_cast<std::int32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();

        double sum = 0.0;
        for (std::size_t r : rows) sum += y_[r];
        const double mean = sum / static_cast<double>(rows.size());
        tree_.nodes[static_cast<std::size_t>(id)].value = mean;

        const bool constant =
            std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return y_[r] == y_[rows.front()]; });
        if (depth >= params_.max_depth || rows.size() < 2 * params_.min_leaf || constant) return id;

        const Split best = find_split(rows, mean);
        if (best.feature < 0) return id;

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t r : rows) {
            (m_.at(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        const std::int32_t l = grow(std::move(left), depth + 1);
        const std::int32_t r = grow(std::move(right), depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    std::vector<std::size_t> candidate_features() {
        std::vector<std::size_t> features(m_.cols);
        std::iota(features.begin(), features.end(), std::size_t{0});
        if (k_ < m_.cols) {
            for (std::size_t i = 0; i < k_; ++i) {
                const auto j = i + static_cast<std::size_t>(rng_.below(m_.cols - i));
                std::swap(features[i], features[j]);
            }
            features.resize(k_);
            std::sort(features.begin(), features.end());
        }
        return features;
    }

    // Targets are centered on the node mean before accumulation to keep
    // the sum-of-squares identity well conditioned.
    Split find_split(const std::vector<std::size_t>& rows, double mean) {
        const std::size_t n = rows.size();
        double total = 0.0;
        double total_sq = 0.0;
        for (std::size_t r : rows) {
            const double c = y_[r] - mean;
            total += c;
            total_sq += c * c;
        }
        const double parent_sse = total_sq - total * total / static_cast<double>(n);

        Split best;
        std::vector<std::pair<double, double>> column(n);
        for (std::size_t f : candidate_features()) {
            for (std::size_t i = 0; i < n; ++i) column[i] = {m_.at(rows[i], f), y_[rows[i]] - mean};
            std::sort(column.begin(), column.end());

            double left_sum = 0.0;
            double left_sq = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += column[i].second;
                left_sq += column[i].second * column[i].second;
                if (column[i].first == column[i + 1].first) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < params_.min_leaf || nr < params_.min_leaf) continue;

                const double right_sum = total - left_sum;
                const double right_sq = total_sq - left_sq;
                const double sse = (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                                   (right_sq - right_sum * right_sum / static_cast<double>(nr));
                const double gain = parent_sse - sse;
                if (gain > best.gain + kGainTolerance) {
                    double threshold = 0.5 * (column[i].first + column[i + 1].first);
                    if (threshold >= column[i + 1].first) threshold = column[i].first;
                    best = {static_cast<std::int32_t>(f), threshold, gain};
                }
            }
        }
        return best;
    }

    const TrainingMatrix& m_;
    std::span<const double> y_;
    const TreeParams& params_;
    Rng& rng_;
    std::size_t k_;
    RegressionTree tree_;
};

void check_features(std::span<const double> x, std::size_t n_features) {
    if (x.size() != n_features) {
        throw Error(errc::invalid_argument, "feature vector has " + std::to_string(x.size()) + " values, model expects " +
                                                std::to_string(n_features));
    }
}

} // namespace

double RegressionTree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

int RegressionTree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> d(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t features_per_node(std::size_t d, double fraction) {
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(d) + 0.5));
    return std::clamp<std::size_t>(k, 1, d);
}

RegressionTree train_tree(const TrainingMatrix& m, std::span<const double> targets,
                          std::span<const std::size_t> rows, const TreeParams& params, Rng& rng) {
    if (rows.empty()) throw Error(errc::invalid_argument, "cannot train a tree on empty data");
    if (params.max_depth < 0 || params.min_leaf < 1 || !(params.features_per_split > 0.0 && params.features_per_split <= 1.0)) {
        throw Error(errc::invalid_argument, "invalid tree parameters");
    }
    TreeBuilder builder(m, targets, params, rng);
    return builder.build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

RegressionTree train_tree(std::span<const balance::LabeledSample> data, const TreeParams& params, Rng& rng) {
    const TrainingMatrix m = TrainingMatrix::from_samples(data);
    std::vector<std::size_t> rows(m.rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return train_tree(m, m.y, rows, params, rng);
}

void TrainConfig::validate() const {
    auto bad = [](const std::string& what) { throw Error(errc::invalid_argument, "invalid config: " + what); };
    if (n_trees < 1) bad("n_trees must be positive");
    if (max_depth < 1) bad("max_depth must be positive");
    if (min_leaf < 1) bad("min_leaf must be positive");
    if (!(features_per_split > 0.0 && features_per_split <= 1.0)) bad("features_per_split must be in (0,1]");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) bad("learning_rate must be in (0,1]");
}

double ForestModel::predict(std::span<const double> x) const {
    check_features(x, n_features);
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(x);
    return sum / static_cast<double>(trees.size());
}

double GbmModel::predict(std::span<const double> x) const { return predict_staged(x, trees.size()); }

double GbmModel::predict_staged(std::span<const double> x, std::size_t stages) const {
    check_features(x, n_features);
    double out = base;
    for (std::size_t i = 0; i < std::min(stages, trees.size()); ++i) out += config.learning_rate * trees[i].predict(x);
    return out;
}

ForestModel train_forest(std::span<const balance::LabeledSample> data, const TrainConfig& config) {
    config.validate();
    if (data.size() < 2) throw Error(errc::invalid_argument, "forest training needs at least two samples");
    const TrainingMatrix m = TrainingMatrix::from_samples(data);
    const TreeParams params{config.max_depth, config.min_leaf, config.features_per_split};

    ForestModel model;
    model.config = config;
    model.feature_contract_version = data.front().features.contract_version;
    model.n_features = m.cols;
    model.trees.resize(config.n_trees);

    auto train_one = [&](std::size_t t) {
        Rng rng(derive_seed(config.seed, t));
        std::vector<std::size_t> rows(m.rows);
        if (config.bootstrap) {
            for (auto& r : rows) r = static_cast<std::size_t>(rng.below(m.rows));
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        model.trees[t] = train_tree(m, m.y, rows, params, rng);
    };

    const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, config.n_trees);
    if (workers == 1) {
        for (std::size_t t = 0; t < config.n_trees; ++t) train_one(t);
    } else {
        std::vector<std::jthread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t t = w; t < config.n_trees; t += workers) train_one(t);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        pool.clear();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return model;
}

GbmModel train_gbm(std::span<const balance::LabeledSample> data, const TrainConfig& config) {
    if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0)) {
        throw Error(errc::invalid_argument, "invalid config: learning_rate must be in (0,1]");
    }
    if (config.min_leaf < 1) throw Error(errc::invalid_argument, "invalid config: min_leaf must be positive");
    if (data.size() < 2) throw Error(errc::invalid_argument, "gradient boosting needs at least two samples");
    const TrainingMatrix m = TrainingMatrix::from_samples(data);

    GbmModel model;
    model.config = config;
    model.feature_contract_version = data.front().features.contract_version;
    model.n_features = m.cols;
    model.base = std::accumulate(m.y.begin(), m.y.end(), 0.0) / static_cast<double>(m.rows);

    std::vector<double> current(m.rows, model.base);
    std::vector<double> residual(m.rows);
    std::vector<std::size_t> rows(m.rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const TreeParams params{kGbmStageDepth, config.min_leaf, 1.0};
    Rng rng(config.seed);

    for (std::size_t s = 0; s < config.n_stages; ++s) {
        for (std::size_t i = 0; i < m.rows; ++i) residual[i] = m.y[i] - current[i];
        RegressionTree tree = train_tree(m, residual, rows, params, rng);
        for (std::size_t i = 0; i < m.rows; ++i) current[i] += config.learning_rate * tree.predict(m.row(i));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

} // namespace edgehr::models
