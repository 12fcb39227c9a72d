#include "s2vr/kernels.hpp"

#include "s2vr/errors.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace s2vr::kernels {

namespace {

void require_square(const Matrix& K, const char* what) {
    if (K.rows() != K.cols()) {
        throw ShapeError(std::string(what) + ": expected a square matrix, got " + std::to_string(K.rows()) + "x" +
                         std::to_string(K.cols()));
    }
}

double frobenius_inner(const Matrix& A, const Matrix& B) {
    return (A.array() * B.array()).sum();
}

}  // namespace

Matrix squared_distances(const Matrix& X, const Matrix& X2) {
    if (X.rows() != X2.rows()) {
        throw ShapeError("squared_distances: feature dimensions differ (" + std::to_string(X.rows()) + " vs " +
                         std::to_string(X2.rows()) + ")");
    }
    const Eigen::Index n = X.cols();
    const Eigen::Index m = X2.cols();
    const Eigen::Index d = X.rows();
    Matrix out(n, m);
    const bool same = (&X == &X2) || (n == m && X.data() == X2.data());
    for (Eigen::Index j = 0; j < m; ++j) {
        const double* b = X2.col(j).data();
        const Eigen::Index start = same ? j : 0;
        for (Eigen::Index i = start; i < n; ++i) {
            const double* a = X.col(i).data();
            double acc = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) {
                const double diff = a[k] - b[k];
                acc += diff * diff;
            }
            out(i, j) = acc;
            if (same) out(j, i) = acc;
        }
    }
    return out;
}

Matrix gaussian_from_squared_distances(const Matrix& sq_dist, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ParameterError("gaussian kernel: bandwidth must be positive and finite, got " + std::to_string(sigma));
    }
    const double scale = -1.0 / (2.0 * sigma * sigma);
    return (sq_dist.array() * scale).exp().matrix();
}

Matrix gaussian_kernel(const Matrix& X, const Matrix& X2, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ParameterError("gaussian kernel: bandwidth must be positive and finite, got " + std::to_string(sigma));
    }
    return gaussian_from_squared_distances(squared_distances(X, X2), sigma);
}

Matrix center_kernel(const Matrix& K) {
    require_square(K, "center_kernel");
    const double n = static_cast<double>(K.rows());
    if (K.rows() == 0) return K;
    const Vector col_mean = K.colwise().sum().transpose() / n;
    const Vector row_mean = K.rowwise().sum() / n;
    const double grand = K.sum() / (n * n);
    Matrix out = K;
    out.colwise() -= row_mean;
    out.rowwise() -= col_mean.transpose();
    out.array() += grand;
    return out;
}

double alignment(const Matrix& K, const Matrix& K_target) {
    require_square(K, "alignment");
    require_square(K_target, "alignment");
    if (K.rows() != K_target.rows()) {
        throw ShapeError("alignment: kernel sizes differ");
    }
    const double kk = frobenius_inner(K, K);
    const double tt = frobenius_inner(K_target, K_target);
    if (kk == 0.0) throw DegenerateError("alignment: kernel has zero Frobenius norm");
    if (tt == 0.0) throw DegenerateError("alignment: target kernel has zero Frobenius norm");
    return frobenius_inner(K, K_target) / std::sqrt(kk * tt);
}

Matrix target_kernel(const Matrix& Y, bool center) {
    Matrix kt = Y.transpose() * Y;
    return center ? center_kernel(kt) : kt;
}

std::vector<double> bandwidth_grid(int count, double lo, double hi) {
    if (count < 1) throw ParameterError("bandwidth_grid: count must be >= 1");
    if (!(lo > 0.0) || !(hi >= lo)) throw ParameterError("bandwidth_grid: need 0 < lo <= hi");
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    for (int i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return out;
}

BaseKernelBank gaussian_bank(const Matrix& X, std::span<const double> bandwidths) {
    return gaussian_cross_bank(X, X, bandwidths);
}

BaseKernelBank gaussian_cross_bank(const Matrix& X, const Matrix& X2, std::span<const double> bandwidths) {
    if (bandwidths.empty()) throw ParameterError("gaussian bank: at least one bandwidth required");
    const Matrix sq = squared_distances(X, X2);
    BaseKernelBank bank;
    bank.bandwidths.assign(bandwidths.begin(), bandwidths.end());
    bank.kernels.reserve(bandwidths.size());
    for (double sigma : bandwidths) bank.kernels.push_back(gaussian_from_squared_distances(sq, sigma));
    return bank;
}

BaseKernelBank center_bank(const BaseKernelBank& bank) {
    if (bank.centered) return bank;
    BaseKernelBank out;
    out.bandwidths = bank.bandwidths;
    out.centered = true;
    out.kernels.reserve(bank.size());
    for (const auto& K : bank.kernels) out.kernels.push_back(center_kernel(K));
    return out;
}

KernelWeights KernelWeights::from_raw(const Vector& raw) {
    Vector w = raw.cwiseMax(0.0);
    const double norm = w.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw DegenerateError("kernel weights: no positive weight to normalize");
    }
    w /= norm;
    return KernelWeights(std::move(w));
}

KernelWeights KernelWeights::from_normalized(const Vector& omega) {
    if (omega.size() == 0) throw ParameterError("kernel weights: empty");
    if ((omega.array() < 0.0).any()) throw ParameterError("kernel weights: negative entry");
    if (std::abs(omega.norm() - 1.0) > 1e-10) throw ParameterError("kernel weights: not unit norm");
    return KernelWeights(omega);
}

Matrix combine(const BaseKernelBank& bank, const KernelWeights& weights) {
    if (bank.size() == 0) throw ShapeError("combine: empty bank");
    if (static_cast<std::size_t>(weights.size()) != bank.size()) {
        throw ShapeError("combine: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(bank.size()) + " kernels");
    }
    Matrix out = Matrix::Zero(bank.kernels[0].rows(), bank.kernels[0].cols());
    for (std::size_t m = 0; m < bank.size(); ++m) {
        out.noalias() += weights[static_cast<Eigen::Index>(m)] * bank.kernels[m];
    }
    return out;
}

AlignmentResult align_weights(const BaseKernelBank& bank, const Matrix& K_target, const QpOptions& options) {
    if (bank.size() == 0) throw ParameterError("align_weights: empty bank");
    const BaseKernelBank centered = center_bank(bank);
    const auto M = static_cast<Eigen::Index>(centered.size());
    for (const auto& K : centered.kernels) {
        if (K.rows() != K_target.rows() || K.cols() != K_target.cols()) {
            throw ShapeError("align_weights: kernel and target sizes differ");
        }
    }
    if (K_target.squaredNorm() == 0.0) throw DegenerateError("align_weights: target kernel is zero");

    AlignmentResult result;
    result.alpha.resize(M);
    result.V.resize(M, M);
    result.base_alignment.resize(M);
    for (Eigen::Index i = 0; i < M; ++i) {
        const auto& Ki = centered.kernels[static_cast<std::size_t>(i)];
        result.alpha[i] = frobenius_inner(Ki, K_target);
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = frobenius_inner(Ki, centered.kernels[static_cast<std::size_t>(j)]);
            result.V(i, j) = v;
            result.V(j, i) = v;
        }
        result.base_alignment[i] =
            result.V(i, i) > 0.0 ? result.alpha[i] / std::sqrt(result.V(i, i) * K_target.squaredNorm()) : 0.0;
    }

    const QpResult qp = solve_nonneg_qp(result.V, result.alpha, options);
    if (!(qp.q.norm() > 0.0)) {
        std::ostringstream msg;
        msg << "align_weights: alignment QP returned q* = 0 (no base kernel is positively aligned with the "
               "target); alpha = [";
        for (Eigen::Index i = 0; i < M; ++i) msg << (i ? ", " : "") << result.alpha[i];
        msg << "]";
        throw DegenerateError(msg.str());
    }
    result.weights = KernelWeights::from_raw(qp.q);
    const Vector& w = result.weights.values();
    const double num = w.dot(result.alpha);
    const double den = std::sqrt(w.dot(result.V * w) * K_target.squaredNorm());
    result.combined_alignment = den > 0.0 ? num / den : 0.0;
    return result;
}

}  // namespace s2vr::kernels
