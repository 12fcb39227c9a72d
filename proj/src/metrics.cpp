#include "s2vr/metrics.hpp"

#include "s2vr/errors.hpp"
#include "s2vr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace s2vr::metrics {

namespace {

void require_pair(const Vector& a, const Vector& b, const char* what) {
    if (a.size() != b.size()) throw ShapeError(std::string(what) + ": lengths differ");
    if (a.size() < 2) throw ShapeError(std::string(what) + ": need at least 2 values");
}

double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

double safe_pearson(const Vector& a, const Vector& b) {
    try {
        return pearson(a, b);
    } catch (const DegenerateError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

double rrmse(const Vector& predicted, const Vector& truth, double train_mean) {
    require_pair(predicted, truth, "rrmse");
    const double num = (predicted - truth).squaredNorm();
    const double den = (truth.array() - train_mean).square().sum();
    if (den == 0.0) throw DegenerateError("rrmse: truth equals the training mean everywhere (zero denominator)");
    return std::sqrt(num / den) * 100.0;
}

double rrmse_signed_sums(const Vector& predicted, const Vector& truth, double train_mean) {
    require_pair(predicted, truth, "rrmse_signed_sums");
    const double num = (predicted - truth).sum();
    const double den = (train_mean - truth.array()).sum();
    if (den == 0.0) throw DegenerateError("rrmse_signed_sums: zero denominator");
    return num / den * 100.0;
}

double pearson(const Vector& a, const Vector& b) {
    require_pair(a, b, "pearson");
    const Vector ca = a.array() - a.mean();
    const Vector cb = b.array() - b.mean();
    const double na = ca.norm();
    const double nb = cb.norm();
    if (na == 0.0 || nb == 0.0) throw DegenerateError("pearson: constant input");
    return std::clamp(ca.dot(cb) / (na * nb), -1.0, 1.0);
}

GapSummary consistency_summary(const Matrix& predictions) {
    if (predictions.rows() != geometry::kLabelSize) {
        throw ModeError("consistency_summary: needs joint predictions with 139 rows");
    }
    std::array<std::vector<double>, 3> gaps;
    std::vector<double> all;
    for (Eigen::Index i = 0; i < predictions.cols(); ++i) {
        const auto g = geometry::consistency_gap(predictions.col(i));
        for (std::size_t a = 0; a < 3; ++a) {
            gaps[a].push_back(g[a]);
            all.push_back(g[a]);
        }
    }
    GapSummary s;
    for (std::size_t a = 0; a < 3; ++a) {
        s.median[a] = median_of(gaps[a]);
        s.mean[a] = gaps[a].empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : std::accumulate(gaps[a].begin(), gaps[a].end(), 0.0) /
                                          static_cast<double>(gaps[a].size());
    }
    s.overall_median = median_of(all);
    return s;
}

EvalReport evaluate_predictions(const Matrix& predicted, const Matrix& truth, const Vector& train_means,
                                model::OutputMode mode) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols() || train_means.size() != truth.rows()) {
        throw ShapeError("evaluate: prediction, truth and mean shapes do not conform");
    }
    EvalReport r;
    r.mode = mode;
    const Eigen::Index q = truth.rows();
    r.per_output_rrmse.resize(static_cast<std::size_t>(q));
    for (Eigen::Index i = 0; i < q; ++i) {
        r.per_output_rrmse[static_cast<std::size_t>(i)] =
            rrmse(predicted.row(i).transpose(), truth.row(i).transpose(), train_means[i]);
    }
    r.rrmse_mean = std::accumulate(r.per_output_rrmse.begin(), r.per_output_rrmse.end(), 0.0) / static_cast<double>(q);
    if (q >= 3) {
        for (Eigen::Index a = 0; a < 3; ++a) {
            const Eigen::Index row = q - 3 + a;
            r.angle_rrmse[static_cast<std::size_t>(a)] = r.per_output_rrmse[static_cast<std::size_t>(row)];
            r.correlation[static_cast<std::size_t>(a)] =
                safe_pearson(predicted.row(row).transpose(), truth.row(row).transpose());
        }
        r.angle_rrmse_mean = (r.angle_rrmse[0] + r.angle_rrmse[1] + r.angle_rrmse[2]) / 3.0;
    }
    if (mode == model::OutputMode::joint && q == geometry::kLabelSize) r.consistency = consistency_summary(predicted);
    return r;
}

EvalReport evaluate(const model::S2VRModel& m, const Matrix& X_test, const Matrix& Y_test, const Vector& train_means) {
    const Matrix truth = model::select_outputs(Y_test, m.mode);
    Vector means = train_means;
    if (means.size() != truth.rows()) {
        if (means.size() == geometry::kLabelSize && truth.rows() == geometry::kAngles) {
            means = Vector(train_means.tail(geometry::kAngles));
        } else {
            throw ShapeError("evaluate: train means do not match the model outputs");
        }
    }
    return evaluate_predictions(m.predict(X_test), truth, means, m.mode);
}

std::vector<int> fold_assignment(Eigen::Index samples, const CvOptions& cv) {
    const int k = cv.leave_one_out ? static_cast<int>(samples) : cv.folds;
    if (k < 2 || k > samples) {
        throw ParameterError("cross validation: fold count " + std::to_string(k) + " invalid for " +
                             std::to_string(samples) + " samples");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(samples));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    if (!cv.leave_one_out) {
        std::mt19937_64 rng(cv.seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<int> fold(static_cast<std::size_t>(samples));
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        fold[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k));
    }
    return fold;
}

CvResult cross_validate(const Matrix& X, const Matrix& Y_in, const solver::TrainConfig& cfg, model::OutputMode mode,
                        Method method, const CvOptions& cv, const model::ModelOptions& options) {
    const Matrix Y = model::select_outputs(Y_in, mode);
    const Eigen::Index n = X.cols();
    if (Y.cols() != n) throw ShapeError("cross_validate: feature and label counts differ");
    const std::vector<int> fold = fold_assignment(n, cv);
    const int k = *std::max_element(fold.begin(), fold.end()) + 1;
    const Eigen::Index q = Y.rows();

    CvResult out;
    out.predictions = Matrix::Zero(q, n);
    Vector pooled_num = Vector::Zero(q);
    Vector pooled_den = Vector::Zero(q);

    for (int f = 0; f < k; ++f) {
        std::vector<Eigen::Index> train, test;
        for (Eigen::Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
        const auto ntr = static_cast<Eigen::Index>(train.size());
        const auto nte = static_cast<Eigen::Index>(test.size());
        Matrix Xtr(X.rows(), ntr), Ytr(q, ntr), Xte(X.rows(), nte), Yte(q, nte);
        for (Eigen::Index j = 0; j < ntr; ++j) {
            Xtr.col(j) = X.col(train[static_cast<std::size_t>(j)]);
            Ytr.col(j) = Y.col(train[static_cast<std::size_t>(j)]);
        }
        for (Eigen::Index j = 0; j < nte; ++j) {
            Xte.col(j) = X.col(test[static_cast<std::size_t>(j)]);
            Yte.col(j) = Y.col(test[static_cast<std::size_t>(j)]);
        }
        const model::S2VRModel m = method == Method::s2vr ? model::fit_model(Xtr, Ytr, cfg, mode, options)
                                                          : model::fit_baseline_svr(Xtr, Ytr, cfg, mode, options);
        const Matrix pred = m.predict(Xte);
        for (Eigen::Index j = 0; j < nte; ++j) out.predictions.col(test[static_cast<std::size_t>(j)]) = pred.col(j);
        const Vector means = Ytr.rowwise().mean();
        pooled_num += (pred - Yte).rowwise().squaredNorm();
        pooled_den += (Yte.colwise() - means).rowwise().squaredNorm();
        if (nte >= 2) out.fold_reports.push_back(evaluate_predictions(pred, Yte, means, mode));
    }

    // Correlations and the consistency gap come from the pooled out-of-fold predictions.
    EvalReport& r = out.report;
    r = evaluate_predictions(out.predictions, Y, Y.rowwise().mean(), mode);
    r.per_output_rrmse.assign(static_cast<std::size_t>(q), 0.0);
    if (cv.leave_one_out || out.fold_reports.size() != static_cast<std::size_t>(k)) {
        for (Eigen::Index i = 0; i < q; ++i) {
            if (pooled_den[i] == 0.0) throw DegenerateError("cross_validate: output " + std::to_string(i) + " is constant");
            r.per_output_rrmse[static_cast<std::size_t>(i)] = std::sqrt(pooled_num[i] / pooled_den[i]) * 100.0;
        }
        r.rrmse_mean = std::accumulate(r.per_output_rrmse.begin(), r.per_output_rrmse.end(), 0.0) / static_cast<double>(q);
        if (q >= 3) {
            for (std::size_t a = 0; a < 3; ++a) r.angle_rrmse[a] = r.per_output_rrmse[static_cast<std::size_t>(q) - 3 + a];
        }
    } else {
        r.rrmse_mean = 0.0;
        r.angle_rrmse = {0.0, 0.0, 0.0};
        for (const EvalReport& fr : out.fold_reports) {
            for (std::size_t i = 0; i < r.per_output_rrmse.size(); ++i) r.per_output_rrmse[i] += fr.per_output_rrmse[i] / k;
            r.rrmse_mean += fr.rrmse_mean / k;
            for (std::size_t a = 0; a < 3; ++a) r.angle_rrmse[a] += fr.angle_rrmse[a] / k;
        }
    }
    r.angle_rrmse_mean = (r.angle_rrmse[0] + r.angle_rrmse[1] + r.angle_rrmse[2]) / 3.0;
    return out;
}

}  // namespace s2vr::metrics
