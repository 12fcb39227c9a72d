#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace s2vr::kernels {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Pairwise squared Euclidean distances between the columns of X (d x N) and X2 (d x N2).
/// Each entry is summed in a fixed order over the feature dimension, so the diagonal of
/// squared_distances(X, X) is exactly zero.
Matrix squared_distances(const Matrix& X, const Matrix& X2);

/// exp(-||x_i - x'_j||^2 / (2 sigma^2)) for every column pair.
Matrix gaussian_kernel(const Matrix& X, const Matrix& X2, double sigma);

/// Same as gaussian_kernel but reuses a precomputed squared-distance matrix.
Matrix gaussian_from_squared_distances(const Matrix& sq_dist, double sigma);

/// Double centering: subtract row and column means, add back the grand mean.
Matrix center_kernel(const Matrix& K);

/// Cosine of the Frobenius angle between K and K_T.
double alignment(const Matrix& K, const Matrix& K_target);

/// K_T = Y^T Y, optionally double-centered.
Matrix target_kernel(const Matrix& Y, bool center = false);

/// `count` bandwidths evenly spaced over [lo, hi].
std::vector<double> bandwidth_grid(int count = 10, double lo = 0.1, double hi = 1.0);

struct BaseKernelBank {
    std::vector<Matrix> kernels;
    std::vector<double> bandwidths;
    bool centered = false;

    [[nodiscard]] std::size_t size() const { return kernels.size(); }
};

/// One Gaussian kernel over the columns of X per bandwidth.
BaseKernelBank gaussian_bank(const Matrix& X, std::span<const double> bandwidths);

/// Gaussian cross kernels between X and X2, one per bandwidth.
BaseKernelBank gaussian_cross_bank(const Matrix& X, const Matrix& X2, std::span<const double> bandwidths);

BaseKernelBank center_bank(const BaseKernelBank& bank);

/// Nonnegative, unit Euclidean norm combination weights.
class KernelWeights {
public:
    KernelWeights() = default;

    /// Clamps negatives to zero and rescales to unit norm. Throws DegenerateError when
    /// nothing positive remains.
    static KernelWeights from_raw(const Vector& raw);

    /// Accepts weights that already satisfy the invariants within 1e-10.
    static KernelWeights from_normalized(const Vector& omega);

    [[nodiscard]] const Vector& values() const { return omega_; }
    [[nodiscard]] Eigen::Index size() const { return omega_.size(); }
    [[nodiscard]] double operator[](Eigen::Index i) const { return omega_[i]; }

private:
    explicit KernelWeights(Vector omega) : omega_(std::move(omega)) {}
    Vector omega_;
};

/// Weighted sum of the bank's kernels.
Matrix combine(const BaseKernelBank& bank, const KernelWeights& weights);

struct QpOptions {
    int max_iterations = 20000;
    double armijo = 1e-4;
    double shrink = 0.5;
    double min_step = 1e-16;
};

struct QpResult {
    Vector q;
    int iterations = 0;
    double objective = 0.0;
};

/// KKT diagnostics of a candidate solution of min q^T V q - 2 q^T alpha, q >= 0.
struct QpKkt {
    double min_gradient = 0.0;       ///< min_i (2Vq - 2alpha)_i
    double max_slackness = 0.0;      ///< max_i |q_i (Vq - alpha)_i|
    double min_entry = 0.0;          ///< min_i q_i

    /// Gradient >= -tol, slackness <= tol (1 + ||alpha||), q >= 0.
    [[nodiscard]] bool satisfied(double alpha_norm, double tol = 1e-8) const;
};

QpKkt qp_kkt(const Matrix& V, const Vector& alpha, const Vector& q);

/// Nonnegative convex QP: projected gradient with Armijo backtracking, finished by a
/// primal active-set polish on the detected support. Intended for small M (<= 64).
QpResult solve_nonneg_qp(const Matrix& V, const Vector& alpha, const QpOptions& options = {});

struct AlignmentResult {
    KernelWeights weights;
    Vector alpha;                 ///< alpha_m = tr(Kbar_m K_T)
    Matrix V;                     ///< V_ij = tr(Kbar_i Kbar_j)
    Vector base_alignment;        ///< alignment of each centered base kernel
    double combined_alignment = 0.0;
};

/// Learns combination weights maximizing alignment with K_T. Uncentered banks are
/// centered first.
AlignmentResult align_weights(const BaseKernelBank& bank, const Matrix& K_target, const QpOptions& options = {});

}  // namespace s2vr::kernels
