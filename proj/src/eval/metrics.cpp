#include "edgehr/eval/metrics.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace edgehr::eval {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, std::size_t min_len) {
    if (a.size() != b.size()) throw Error(errc::invalid_argument, "length mismatch between truth and predictions");
    if (a.size() < min_len) {
        throw Error(errc::invalid_argument, "need at least " + std::to_string(min_len) + " paired values");
    }
}

} // namespace

double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
    check_pair(y_true, y_pred, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) acc += (y_pred[i] - y_true[i]) * (y_pred[i] - y_true[i]);
    return std::sqrt(acc / static_cast<double>(y_true.size()));
}

double mae(std::span<const double> y_true, std::span<const double> y_pred) {
    check_pair(y_true, y_pred, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) acc += std::abs(y_pred[i] - y_true[i]);
    return acc / static_cast<double>(y_true.size());
}

std::vector<int> classify_from_hb(std::span<const double> y_pred, balance::LabelMode mode) {
    std::vector<int> out;
    out.reserve(y_pred.size());
    for (double p : y_pred) {
        if (!std::isfinite(p)) throw Error(errc::invalid_argument, "non-finite prediction");
        const double clamped = std::clamp(p, 0.01, 24.99);
        out.push_back(balance::class_index(mode, clamped));
    }
    return out;
}

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts)
        for (std::size_t c : row) t += c;
    return t;
}

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream out;
    out << "true\\predicted";
    for (const auto& l : labels) out << ',' << l;
    out << '\n';
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out << labels[i];
        for (std::size_t c : counts[i]) out << ',' << c;
        out << '\n';
    }
    return out.str();
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, balance::LabelMode mode) {
    if (truth.size() != predicted.size()) throw Error(errc::invalid_argument, "length mismatch in confusion matrix");
    const auto k = static_cast<std::size_t>(balance::class_count(mode));
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < k; ++i) cm.labels.emplace_back(balance::class_name(mode, static_cast<int>(i)));
    cm.counts.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= k || predicted[i] < 0 ||
            static_cast<std::size_t>(predicted[i]) >= k) {
            throw Error(errc::range, "class index out of range");
        }
        ++cm.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    }
    return cm;
}

BinaryMetrics binary_metrics(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp) {
    if (tp + fn == 0) throw Error(errc::undefined_metric, "sensitivity undefined: no anemic cases");
    if (tn + fp == 0) throw Error(errc::undefined_metric, "specificity undefined: no non-anemic cases");
    return {static_cast<double>(tp) / static_cast<double>(tp + fn), static_cast<double>(tn) / static_cast<double>(tn + fp)};
}

BinaryMetrics binary_metrics(const ConfusionMatrix& cm, balance::LabelMode mode) {
    const std::size_t k = cm.counts.size();
    if (k != static_cast<std::size_t>(balance::class_count(mode))) {
        throw Error(errc::invalid_argument, "confusion matrix does not match the label mode");
    }
    auto positive = [&](std::size_t c) {
        return mode == balance::LabelMode::remark ? c == static_cast<std::size_t>(balance::RemarkClass::anemic)
                                                  : c != static_cast<std::size_t>(balance::SeverityClass::non_anemic);
    };
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t p = 0; p < k; ++p) {
            const std::size_t n = cm.counts[t][p];
            if (positive(t)) (positive(p) ? tp : fn) += n;
            else (positive(p) ? fp : tn) += n;
        }
    }
    return binary_metrics(tp, fn, tn, fp);
}

BlandAltman bland_altman(std::span<const double> y_true, std::span<const double> y_pred) {
    check_pair(y_true, y_pred, 2);
    std::vector<double> diffs(y_true.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) diffs[i] = y_pred[i] - y_true[i];
    BlandAltman ba;
    ba.bias = stats::mean(diffs);
    double ss = 0.0;
    for (double d : diffs) ss += (d - ba.bias) * (d - ba.bias);
    const double sd = std::sqrt(ss / static_cast<double>(diffs.size() - 1));
    ba.lower = ba.bias - 1.96 * sd;
    ba.upper = ba.bias + 1.96 * sd;
    return ba;
}

} // namespace edgehr::eval
