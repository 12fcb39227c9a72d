#pragma once

#include "s2vr/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace s2vr::metrics {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// sqrt(sum (yhat - y)^2 / sum (train_mean - y)^2) * 100.
double rrmse(const Vector& predicted, const Vector& truth, double train_mean);

/// The ratio of plain signed sums, kept for comparison experiments only. Can be negative.
double rrmse_signed_sums(const Vector& predicted, const Vector& truth, double train_mean);

/// Sample Pearson correlation.
double pearson(const Vector& a, const Vector& b);

struct GapSummary {
    std::array<double, 3> median{};  ///< per angle (TA, MA, BA)
    std::array<double, 3> mean{};
    double overall_median = 0.0;     ///< median over all angles and samples
};

struct EvalReport {
    model::OutputMode mode = model::OutputMode::joint;
    double rrmse_mean = 0.0;               ///< percent, averaged over outputs
    std::vector<double> per_output_rrmse;  ///< percent
    double angle_rrmse_mean = 0.0;         ///< percent, averaged over the three angle outputs
    std::array<double, 3> angle_rrmse{};
    std::array<double, 3> correlation{};   ///< Pearson per angle (TA, MA, BA)
    std::optional<GapSummary> consistency; ///< joint-mode spine predictions only
};

/// Median of absolute gaps between predicted angles and angles re-measured on the predicted
/// landmarks. `predictions` must have 139 rows.
GapSummary consistency_summary(const Matrix& predictions);

/// Metrics of a prediction matrix. The last three rows are the angle outputs.
EvalReport evaluate_predictions(const Matrix& predicted, const Matrix& truth, const Vector& train_means,
                                model::OutputMode mode);

/// Predicts X_test with the model and scores against Y_test (labels as stored on disk; the
/// model's mode selects the rows).
EvalReport evaluate(const model::S2VRModel& model, const Matrix& X_test, const Matrix& Y_test,
                    const Vector& train_means);

enum class Method { s2vr, svr };

struct CvOptions {
    int folds = 5;
    bool leave_one_out = false;
    std::uint64_t seed = 0;
};

struct CvResult {
    EvalReport report;         ///< RRMSE averaged per fold, correlation over pooled predictions
    Matrix predictions;        ///< out-of-fold predictions, q x N
    std::vector<EvalReport> fold_reports;
};

/// Deterministic fold assignment: fold index of every sample.
std::vector<int> fold_assignment(Eigen::Index samples, const CvOptions& options);

CvResult cross_validate(const Matrix& X, const Matrix& Y, const solver::TrainConfig& cfg, model::OutputMode mode,
                        Method method, const CvOptions& cv, const model::ModelOptions& options = {});

}  // namespace s2vr::metrics
