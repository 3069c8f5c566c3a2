/**
 * @file tree.hpp
 * @brief CART regression trees, random forests and gradient boosting.
 *
 * Split search is greedy variance reduction. Candidate thresholds are the
 * midpoints between consecutive distinct feature values, visited in
 * ascending feature index then ascending threshold; a candidate replaces
 * the incumbent only when its gain exceeds it by more than kGainTolerance,
 * so exact and near ties resolve to the lowest feature, then the lowest
 * threshold. A node becomes a leaf at the depth budget, when it holds
 * fewer than 2 * min_leaf rows, when all targets are equal, or when no
 * split gains more than kGainTolerance. Prediction routes x <= threshold
 * to the left child.
 */

#pragma once

#include "edgehr/balance/labels.hpp"
#include "edgehr/common/rng.hpp"
#include "edgehr/models/matrix.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace edgehr::models {

inline constexpr double kGainTolerance = 1e-9;

struct TreeNode {
    /// -1 marks a leaf.
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    /// Leaf prediction; mean target of the node for internal nodes too.
    double value = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Node arena; nodes[0] is the root and children always follow their parent.
struct RegressionTree {
    std::vector<TreeNode> nodes;
    int max_depth = 0;

    double predict(std::span<const double> x) const;
    int depth() const;
    std::size_t leaf_count() const;

    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct TreeParams {
    int max_depth = 10;
    std::size_t min_leaf = 2;
    double features_per_split = 1.0 / 3.0;
};

/// Number of candidate features per split for d features.
std::size_t features_per_node(std::size_t d, double fraction);

RegressionTree train_tree(std::span<const balance::LabeledSample> data, const TreeParams& params, Rng& rng);

/// Trains on the rows of `m` listed in `rows` (duplicates allowed), with
/// `targets` indexed like the matrix rows.
RegressionTree train_tree(const TrainingMatrix& m, std::span<const double> targets,
                          std::span<const std::size_t> rows, const TreeParams& params, Rng& rng);

struct TrainConfig {
    std::size_t n_trees = 100;
    int max_depth = 10;
    std::size_t min_leaf = 2;
    double features_per_split = 1.0 / 3.0;
    bool bootstrap = true;
    double learning_rate = 0.1;
    std::size_t n_stages = 100;
    std::uint64_t seed = 0;

    /// Throws errc::invalid_argument describing the first bad field.
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Depth of every gradient-boosting stage tree.
inline constexpr int kGbmStageDepth = 3;

struct ForestModel {
    std::vector<RegressionTree> trees;
    TrainConfig config;
    std::uint32_t feature_contract_version = 0;
    std::size_t n_features = 0;

    double predict(std::span<const double> x) const;
};

struct GbmModel {
    double base = 0.0;
    std::vector<RegressionTree> trees;
    TrainConfig config;
    std::uint32_t feature_contract_version = 0;
    std::size_t n_features = 0;

    double predict(std::span<const double> x) const;
    /// Prediction using only the first `stages` trees.
    double predict_staged(std::span<const double> x, std::size_t stages) const;
};

/// Bootstrap (with replacement, size n) per tree from
/// Rng(derive_seed(seed, tree index)); trees train in parallel and the
/// result does not depend on the thread count.
ForestModel train_forest(std::span<const balance::LabeledSample> data, const TrainConfig& config);

/// base = mean(y); each stage fits a depth-3 CART tree on all features to
/// the current residuals and adds learning_rate times its output.
GbmModel train_gbm(std::span<const balance::LabeledSample> data, const TrainConfig& config);

} // namespace edgehr::models
