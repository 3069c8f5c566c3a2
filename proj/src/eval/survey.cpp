#include "edgehr/eval/survey.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/rng.hpp"
#include "edgehr/eval/cv.hpp"
#include "edgehr/models/linear.hpp"
#include "edgehr/models/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace edgehr::eval {

namespace fs = std::filesystem;
using balance::LabeledSample;

const std::vector<std::string>& roster_names() {
    static const std::vector<std::string> names{"RandomForest", "GradientBoosting", "ElasticNet", "Lasso",
                                                "Ridge",        "RANSAC",           "Huber",      "MeanPredictor"};
    return names;
}

RosterEntry roster_entry(const std::string& name, std::uint64_t seed) {
    using Data = std::span<const LabeledSample>;
    if (name == "RandomForest") {
        return {name, [seed](Data d) {
                    models::TrainConfig c;
                    c.seed = seed;
                    return models::Model(models::train_forest(d, c));
                }};
    }
    if (name == "GradientBoosting") {
        return {name, [seed](Data d) {
                    models::TrainConfig c;
                    c.seed = seed;
                    return models::Model(models::train_gbm(d, c));
                }};
    }
    if (name == "ElasticNet") return {name, [](Data d) { return models::Model(models::train_elastic_net(d, 0.05, 0.5)); }};
    if (name == "Lasso") return {name, [](Data d) { return models::Model(models::train_lasso(d, 0.05)); }};
    if (name == "Ridge") return {name, [](Data d) { return models::Model(models::train_ridge(d, 1.0)); }};
    if (name == "RANSAC") {
        return {name, [seed](Data d) {
                    models::RansacParams p;
                    p.inlier_threshold = 0.0;
                    p.seed = seed;
                    auto base = [](Data s) { return models::train_ridge(s, 1.0); };
                    return models::Model(models::train_ransac(d, base, p));
                }};
    }
    if (name == "Huber") return {name, [](Data d) { return models::Model(models::train_huber(d, 1.35, 1.0)); }};
    if (name == "MeanPredictor") return {name, [](Data d) { return models::Model(models::train_mean(d)); }};
    throw Error(errc::invalid_argument, "unknown model '" + name + "'");
}

std::vector<RosterEntry> default_roster(std::uint64_t seed) {
    std::vector<RosterEntry> out;
    for (const auto& n : roster_names()) out.push_back(roster_entry(n, seed));
    return out;
}

std::vector<std::size_t> stratified_holdout(std::span<const LabeledSample> samples, double fraction,
                                            std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error(errc::invalid_argument, "test fraction must be in (0, 1)");
    std::vector<std::vector<std::size_t>> by_class(2);
    for (const auto& s : samples) by_class[static_cast<std::size_t>(balance::remark_of(s.hb_gdl))].push_back(s.id);

    std::vector<std::size_t> test;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& ids = by_class[c];
        Rng rng(derive_seed(seed, c));
        rng.shuffle(std::span<std::size_t>(ids));
        auto take = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ids.size())));
        if (take == 0 && ids.size() >= 2) take = 1;
        take = std::min(take, ids.size() > 0 ? ids.size() - 1 : 0);
        test.insert(test.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(test.begin(), test.end());
    return test;
}

namespace {

[[noreturn]] void rethrow_attributed(const std::string& model, const std::string& phase) {
    try {
        throw;
    } catch (const Error& e) {
        throw Error(e.code(), model + " (" + phase + "): " + e.what());
    } catch (const std::exception& e) {
        throw Error(errc::invalid_argument, model + " (" + phase + "): " + e.what());
    }
}

std::vector<double> predict_all(const models::Model& m, std::span<const LabeledSample> data) {
    std::vector<double> out;
    out.reserve(data.size());
    for (const auto& s : data) out.push_back(models::predict(m, s.features));
    return out;
}

std::vector<double> targets(std::span<const LabeledSample> data) {
    std::vector<double> out;
    out.reserve(data.size());
    for (const auto& s : data) out.push_back(s.hb_gdl);
    return out;
}

std::string fmt(double v, int digits = 6) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

SurveyResult run_survey(std::span<const LabeledSample> samples, const std::vector<RosterEntry>& roster,
                        const SurveyConfig& config) {
    if (roster.empty()) throw Error(errc::invalid_argument, "model roster is empty");
    if (samples.empty()) throw Error(errc::invalid_argument, "dataset is empty");
    {
        std::vector<std::size_t> ids;
        for (const auto& s : samples) ids.push_back(s.id);
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
            throw Error(errc::invalid_argument, "sample ids must be unique");
        }
    }

    SurveyResult r;
    r.config = config;
    r.test_ids = stratified_holdout(samples, config.test_fraction, derive_seed(config.seed, 0));

    std::vector<LabeledSample> test, remainder;
    for (const auto& s : samples) {
        if (std::binary_search(r.test_ids.begin(), r.test_ids.end(), s.id)) test.push_back(s);
        else remainder.push_back(s);
    }
    for (const auto& s : remainder) r.balance_input_ids.push_back(s.id);

    auto balanced = balance::kde_undersample(remainder, config.mode, derive_seed(config.seed, 1));
    r.balance = balanced.report;
    const auto& train = balanced.samples;
    for (const auto& s : train) r.train_ids.push_back(s.id);

    std::vector<std::size_t> positions(train.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    const auto folds = kfold(positions, config.folds, derive_seed(config.seed, 2));

    const auto y_test = targets(test);
    const auto truth = classify_from_hb(y_test, config.mode);

    for (const auto& entry : roster) {
        ModelOutcome o;
        o.name = entry.name;

        for (const auto& f : folds) {
            std::vector<LabeledSample> ftrain, ftest;
            for (std::size_t p : f.train_ids) ftrain.push_back(train[p]);
            for (std::size_t p : f.test_ids) ftest.push_back(train[p]);
            try {
                const auto m = entry.train(ftrain);
                const auto pred = predict_all(m, ftest);
                const auto y = targets(ftest);
                o.cv.push_back({f.k, ftrain.size(), ftest.size(), rmse(y, pred), mae(y, pred)});
            } catch (...) {
                rethrow_attributed(entry.name, "cv fold " + std::to_string(f.k));
            }
        }

        try {
            o.model = entry.train(train);
            o.y_true = y_test;
            o.y_pred = predict_all(o.model, test);
            const auto predicted = classify_from_hb(o.y_pred, config.mode);
            o.confusion = confusion_matrix(truth, predicted, config.mode);
            const auto bm = binary_metrics(o.confusion, config.mode);
            o.test = {entry.name, bm.sensitivity, bm.specificity, mae(o.y_true, o.y_pred), rmse(o.y_true, o.y_pred)};
            o.agreement = bland_altman(o.y_true, o.y_pred);
        } catch (...) {
            rethrow_attributed(entry.name, "test");
        }
        r.rows.push_back(o.test);
        r.outcomes.push_back(std::move(o));
    }

    std::sort(r.rows.begin(), r.rows.end(), [](const MetricRow& a, const MetricRow& b) {
        if (a.rmse_gdl != b.rmse_gdl) return a.rmse_gdl < b.rmse_gdl;
        return a.model < b.model;
    });
    return r;
}

std::string SurveyResult::report_csv() const {
    std::ostringstream out;
    out << "model,sensitivity,specificity,mae_gdl,rmse_gdl\n";
    for (const auto& row : rows) {
        out << row.model << ',' << fmt(row.sensitivity) << ',' << fmt(row.specificity) << ',' << fmt(row.mae_gdl)
            << ',' << fmt(row.rmse_gdl) << '\n';
    }
    return out.str();
}

std::string SurveyResult::report_table() const {
    std::size_t width = 5;
    for (const auto& row : rows) width = std::max(width, row.model.size());
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-*s  %11s  %11s  %7s  %7s\n", static_cast<int>(width), "Model", "Sensitivity",
                  "Specificity", "MAE", "RMSE");
    out << line;
    for (const auto& row : rows) {
        std::snprintf(line, sizeof line, "%-*s  %11.3f  %11.3f  %7.3f  %7.3f\n", static_cast<int>(width),
                      row.model.c_str(), row.sensitivity, row.specificity, row.mae_gdl, row.rmse_gdl);
        out << line;
    }
    return out.str();
}

std::string SurveyResult::cv_csv() const {
    std::ostringstream out;
    out << "model,fold,n_train,n_test,rmse_gdl,mae_gdl\n";
    for (const auto& o : outcomes) {
        for (const auto& f : o.cv) {
            out << o.name << ',' << f.fold << ',' << f.n_train << ',' << f.n_test << ',' << fmt(f.rmse_gdl) << ','
                << fmt(f.mae_gdl) << '\n';
        }
    }
    return out.str();
}

std::string SurveyResult::points_csv() const {
    std::ostringstream out;
    out << "model,id,hb_true,hb_pred\n";
    for (const auto& o : outcomes) {
        for (std::size_t i = 0; i < o.y_true.size(); ++i) {
            out << o.name << ',' << test_ids[i] << ',' << fmt(o.y_true[i]) << ',' << fmt(o.y_pred[i]) << '\n';
        }
    }
    return out.str();
}

std::string SurveyResult::agreement_csv() const {
    std::ostringstream out;
    out << "model,bias_gdl,lower_gdl,upper_gdl\n";
    for (const auto& o : outcomes) {
        out << o.name << ',' << fmt(o.agreement.bias) << ',' << fmt(o.agreement.lower) << ','
            << fmt(o.agreement.upper) << '\n';
    }
    return out.str();
}

void write_survey_reports(const SurveyResult& result, const fs::path& dir) {
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!(out << text)) throw Error(errc::io, "cannot write " + (dir / name).string());
    };
    write("report.csv", result.report_csv());
    write("report.txt", result.report_table());
    write("cv.csv", result.cv_csv());
    write("points.csv", result.points_csv());
    write("agreement.csv", result.agreement_csv());
    write("balance.csv", result.balance.to_csv());
    for (const auto& o : result.outcomes) write("confusion_" + o.name + ".csv", o.confusion.to_csv());
}

} // namespace edgehr::eval
