#pragma once

// Exhaustive-split CART reference. Every (feature, threshold) candidate is
// partitioned explicitly and scored with two-pass sums of squares; nothing
// is shared with the production split search beyond the stopping rules and
// the tie tolerance both must honor.

#include "edgehr/models/tree.hpp"

#include <algorithm>
#include <set>
#include <vector>

namespace oracle {

struct Data {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
};

inline double sse(const Data& d, const std::vector<std::size_t>& rows) {
    double mean = 0.0;
    for (std::size_t r : rows) mean += d.y[r];
    mean /= static_cast<double>(rows.size());
    double acc = 0.0;
    for (std::size_t r : rows) acc += (d.y[r] - mean) * (d.y[r] - mean);
    return acc;
}

inline std::int32_t grow(const Data& d, const std::vector<std::size_t>& rows, int depth,
                         const edgehr::models::TreeParams& p, edgehr::models::RegressionTree& out) {
    const auto id = static_cast<std::int32_t>(out.nodes.size());
    out.nodes.emplace_back();
    double sum = 0.0;
    for (std::size_t r : rows) sum += d.y[r];
    out.nodes[static_cast<std::size_t>(id)].value = sum / static_cast<double>(rows.size());

    bool constant = true;
    for (std::size_t r : rows) constant = constant && d.y[r] == d.y[rows.front()];
    if (depth >= p.max_depth || rows.size() < 2 * p.min_leaf || constant) return id;

    const double parent = sse(d, rows);
    double best_gain = 0.0;
    int best_f = -1;
    double best_t = 0.0;
    const std::size_t n_features = d.x.front().size();
    for (std::size_t f = 0; f < n_features; ++f) {
        std::set<double> distinct;
        for (std::size_t r : rows) distinct.insert(d.x[r][f]);
        std::vector<double> vals(distinct.begin(), distinct.end());
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            const double t = (vals[i] + vals[i + 1]) / 2.0;
            std::vector<std::size_t> l, r;
            for (std::size_t row : rows) (d.x[row][f] <= t ? l : r).push_back(row);
            if (l.size() < p.min_leaf || r.size() < p.min_leaf) continue;
            const double gain = parent - sse(d, l) - sse(d, r);
            if (gain > best_gain + edgehr::models::kGainTolerance) {
                best_gain = gain;
                best_f = static_cast<int>(f);
                best_t = t;
            }
        }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> l, r;
    for (std::size_t row : rows) (d.x[row][static_cast<std::size_t>(best_f)] <= best_t ? l : r).push_back(row);
    const auto li = grow(d, l, depth + 1, p, out);
    const auto ri = grow(d, r, depth + 1, p, out);
    auto& node = out.nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = best_t;
    node.left = li;
    node.right = ri;
    return id;
}

inline edgehr::models::RegressionTree brute_force_tree(const Data& d, const edgehr::models::TreeParams& p) {
    edgehr::models::RegressionTree t;
    t.max_depth = p.max_depth;
    std::vector<std::size_t> rows(d.y.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    grow(d, rows, 0, p, t);
    return t;
}

} // namespace oracle
