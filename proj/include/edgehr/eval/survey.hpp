/**
 * @file survey.hpp
 * @brief The regressor survey: holdout, balancing, cross-validation, fit,
 * and test-set reporting for a roster of models.
 */

#pragma once

#include "edgehr/balance/kde.hpp"
#include "edgehr/eval/metrics.hpp"
#include "edgehr/models/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace edgehr::eval {

using Trainer = std::function<models::Model(std::span<const balance::LabeledSample>)>;

struct RosterEntry {
    std::string name;
    Trainer train;
};

/// Names accepted by roster_entry, in survey order.
const std::vector<std::string>& roster_names();

/// RandomForest, GradientBoosting, ElasticNet, Lasso, Ridge, RANSAC, Huber,
/// MeanPredictor. Tree ensembles take `seed` as their training seed.
RosterEntry roster_entry(const std::string& name, std::uint64_t seed);
std::vector<RosterEntry> default_roster(std::uint64_t seed);

struct MetricRow {
    std::string model;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double mae_gdl = 0.0;
    double rmse_gdl = 0.0;
};

struct CvFold {
    std::size_t fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double rmse_gdl = 0.0;
    double mae_gdl = 0.0;
};

struct ModelOutcome {
    std::string name;
    MetricRow test;
    std::vector<CvFold> cv;
    ConfusionMatrix confusion;
    BlandAltman agreement;
    /// Test-set points in test_ids order.
    std::vector<double> y_true;
    std::vector<double> y_pred;
    models::Model model;
};

struct SurveyConfig {
    balance::LabelMode mode = balance::LabelMode::remark;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
    std::size_t folds = 7;
};

struct SurveyResult {
    SurveyConfig config;
    /// Test rows sorted by RMSE ascending (ties by model name).
    std::vector<MetricRow> rows;
    /// Outcomes in roster order.
    std::vector<ModelOutcome> outcomes;
    std::vector<std::size_t> test_ids;
    /// Ids handed to the balancer (the training remainder).
    std::vector<std::size_t> balance_input_ids;
    /// Ids that survived balancing; every model trains on exactly these.
    std::vector<std::size_t> train_ids;
    balance::BalanceReport balance;

    std::string report_csv() const;
    std::string report_table() const;
    std::string cv_csv() const;
    std::string points_csv() const;
    std::string agreement_csv() const;
};

/// Holds out a seeded split stratified by remark class, KDE-balances the
/// remainder under config.mode, runs k-fold CV on the balanced set for
/// diagnostics, then fits every roster model on the full balanced set and
/// scores it on the holdout. Errors are rethrown prefixed with the model
/// name and keep their category.
SurveyResult run_survey(std::span<const balance::LabeledSample> samples, const std::vector<RosterEntry>& roster,
                        const SurveyConfig& config);

/// Stratified holdout used by run_survey: per remark class, a seeded shuffle
/// and the first round(fraction * count) ids go to test (at least one when
/// the class has two or more members). Returned ids are ascending.
std::vector<std::size_t> stratified_holdout(std::span<const balance::LabeledSample> samples, double fraction,
                                            std::uint64_t seed);

/// report.csv, report.txt, cv.csv, points.csv, agreement.csv, balance.csv and
/// confusion_<model>.csv under `dir`.
void write_survey_reports(const SurveyResult& result, const std::filesystem::path& dir);

} // namespace edgehr::eval
