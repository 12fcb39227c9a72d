#include "s2vr/errors.hpp"
#include "s2vr/kernels.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace s2vr;
using namespace s2vr::kernels;
using s2vr::testing::random_matrix;

namespace {

double min_eig(const Matrix& K) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (K + K.transpose())).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("gaussian kernel values") {
    Matrix a(1, 1), b(1, 1);
    a << 0.0;
    b << 1.0;
    CHECK(gaussian_kernel(a, b, 1.0)(0, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(gaussian_kernel(a, b, 1.0)(0, 0) == doctest::Approx(0.606531).epsilon(1e-6));

    std::mt19937_64 rng(1);
    const Matrix X = random_matrix(rng, 4, 12);
    for (double s : {0.1, 0.5, 3.0}) {
        const Matrix K = gaussian_kernel(X, X, s);
        CHECK(K.diagonal().isOnes(0.0));
        CHECK((K - K.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(min_eig(K) >= -1e-8 * K.trace() / 12.0);
    }
    const Matrix wide = gaussian_kernel(X, X, 1e6);
    CHECK((wide.array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("gaussian kernel errors") {
    Matrix X = Matrix::Ones(2, 3), X2 = Matrix::Ones(3, 3);
    CHECK_THROWS_AS(gaussian_kernel(X, X, 0.0), ParameterError);
    CHECK_THROWS_AS(gaussian_kernel(X, X, -1.0), ParameterError);
    CHECK_THROWS_AS(gaussian_kernel(X, X2, 1.0), ShapeError);
}

TEST_CASE("cross kernel matches entrywise formula") {
    std::mt19937_64 rng(2);
    const Matrix X = random_matrix(rng, 3, 5), Z = random_matrix(rng, 3, 4);
    const Matrix K = gaussian_kernel(X, Z, 0.7);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(K(i, j) == doctest::Approx(std::exp(-(X.col(i) - Z.col(j)).squaredNorm() / (2 * 0.49))).epsilon(1e-13));
}

TEST_CASE("centering") {
    CHECK(center_kernel(Matrix::Ones(5, 5)).cwiseAbs().maxCoeff() <= 1e-15);
    Matrix expected(2, 2);
    expected << 0.5, -0.5, -0.5, 0.5;
    CHECK((center_kernel(Matrix::Identity(2, 2)) - expected).cwiseAbs().maxCoeff() <= 1e-15);

    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        const Matrix K = testing::random_psd(rng, 9);
        const Matrix C = center_kernel(K);
        CHECK(C.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(C.colwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
        CHECK((center_kernel(C) - C).cwiseAbs().maxCoeff() <= 1e-10);
    }
    CHECK_THROWS_AS(center_kernel(Matrix::Ones(2, 3)), ShapeError);
}

TEST_CASE("alignment") {
    std::mt19937_64 rng(4);
    const Matrix K = testing::random_psd(rng, 6);
    const Matrix T = testing::random_psd(rng, 6, 2);
    CHECK(alignment(K, K) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(alignment(K, Matrix(-K)) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(alignment(Matrix::Identity(2, 2), Matrix::Ones(2, 2)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    for (double c : {1e-3, 0.5, 7.0, 1e4}) CHECK(std::abs(alignment(c * K, T) - alignment(K, T)) <= 1e-12);
    CHECK_THROWS_AS(alignment(Matrix::Zero(3, 3), Matrix::Identity(3, 3)), DegenerateError);
    CHECK_THROWS_AS(alignment(Matrix::Identity(3, 3), Matrix::Identity(2, 2)), ShapeError);
}

TEST_CASE("target kernel is Y^T Y") {
    std::mt19937_64 rng(5);
    const Matrix Y = random_matrix(rng, 2, 7);
    const Matrix T = target_kernel(Y);
    CHECK((T - Y.transpose() * Y).norm() <= 1e-13);
    Eigen::FullPivLU<Matrix> lu(T);
    CHECK(lu.rank() <= 2);
}

TEST_CASE("bandwidth grid") {
    const auto g = bandwidth_grid();
    REQUIRE(g.size() == 10);
    CHECK(g.front() == doctest::Approx(0.1));
    CHECK(g.back() == doctest::Approx(1.0));
    CHECK(g[1] - g[0] == doctest::Approx(0.1));
    CHECK_THROWS_AS(bandwidth_grid(0), ParameterError);
}

TEST_CASE("kernel weights") {
    Vector raw(3);
    raw << 3.0, -1.0, 4.0;
    const KernelWeights w = KernelWeights::from_raw(raw);
    CHECK(w[0] == doctest::Approx(0.6));
    CHECK(w[1] == 0.0);
    CHECK(w.values().norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(KernelWeights::from_raw(Vector::Zero(3)), DegenerateError);
    CHECK_THROWS(KernelWeights::from_normalized(Vector::Ones(2)));
}

TEST_CASE("combine") {
    std::mt19937_64 rng(6);
    BaseKernelBank bank;
    for (int m = 0; m < 3; ++m) {
        bank.kernels.push_back(testing::random_psd(rng, 5));
        bank.bandwidths.push_back(0.1 * (m + 1));
    }
    CHECK(combine(bank, KernelWeights::from_raw(Vector::Unit(3, 0))) == bank.kernels[0]);

    Vector raw(3);
    raw << 0.3, 0.0, 1.1;
    const KernelWeights w = KernelWeights::from_raw(raw);
    const Matrix manual = w[0] * bank.kernels[0] + w[1] * bank.kernels[1] + w[2] * bank.kernels[2];
    CHECK((combine(bank, w) - manual).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(min_eig(combine(bank, w)) >= -1e-8 * combine(bank, w).trace() / 5.0);

    BaseKernelBank same{{bank.kernels[0], bank.kernels[0]}, {0.1, 0.2}, false};
    const Matrix both = combine(same, KernelWeights::from_raw(Vector::Ones(2)));
    CHECK((both - std::sqrt(2.0) * bank.kernels[0]).cwiseAbs().maxCoeff() <= 1e-12);

    CHECK_THROWS_AS(combine(bank, KernelWeights::from_raw(Vector::Ones(2))), ShapeError);
}

TEST_CASE("qp: separable and interior cases") {
    Vector a(3);
    a << 3.0, 0.0, -2.0;
    const QpResult r = solve_nonneg_qp(Matrix::Identity(3, 3), a);
    CHECK(std::abs(r.q[0] - 3.0) <= 1e-10);
    CHECK(r.q[1] == 0.0);
    CHECK(r.q[2] == 0.0);

    Matrix V(2, 2);
    V << 2.0, 0.5, 0.5, 1.0;
    Vector alpha(2);
    alpha << 1.0, 1.0;
    const Vector unconstrained = V.ldlt().solve(alpha);
    REQUIRE((unconstrained.array() > 0.0).all());
    CHECK((solve_nonneg_qp(V, alpha).q - unconstrained).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("qp: matches active-set enumeration and certifies KKT") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index m = 4;
        // Gram-type instance: alpha lies in the range of V, as it does for kernel banks,
        // so the problem stays bounded when V is singular.
        const Matrix A = random_matrix(rng, m, t % 3 == 0 ? 2 : 6);
        const Matrix V = A * A.transpose();
        const Vector alpha = A * random_matrix(rng, A.cols(), 1);
        const QpResult r = solve_nonneg_qp(V, alpha);
        const double brute = testing::brute_force_qp(V, alpha);
        CHECK(std::abs(r.objective - brute) <= 1e-8 * (1.0 + std::abs(brute)));
        CHECK(qp_kkt(V, alpha, r.q).satisfied(alpha.norm()));
        CHECK((r.q.array() >= 0.0).all());
    }
}

TEST_CASE("qp errors") {
    Matrix V(2, 2);
    V << 1.0, 0.3, 0.0, 1.0;
    CHECK_THROWS_AS(solve_nonneg_qp(V, Vector::Ones(2)), ShapeError);
    CHECK_THROWS_AS(solve_nonneg_qp(Matrix::Identity(2, 2), Vector::Ones(3)), ShapeError);
    Vector bad = Vector::Ones(2);
    bad[1] = std::nan("");
    CHECK_THROWS_AS(solve_nonneg_qp(Matrix::Identity(2, 2), bad), ParameterError);
}

TEST_CASE("align_weights") {
    std::mt19937_64 rng(9);
    const Matrix X = random_matrix(rng, 3, 20);
    const Matrix Y = random_matrix(rng, 2, 20);
    const Matrix T = target_kernel(Y);

    const AlignmentResult single = align_weights(gaussian_bank(X, std::vector<double>{0.5}), T);
    CHECK(single.weights.size() == 1);
    CHECK(single.weights[0] == 1.0);

    const AlignmentResult r = align_weights(gaussian_bank(X, bandwidth_grid()), T);
    CHECK(r.weights.values().norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((r.weights.values().array() >= 0.0).all());
    for (Eigen::Index m = 0; m < r.base_alignment.size(); ++m) CHECK(r.combined_alignment >= r.base_alignment[m] - 1e-9);

    // Trace inner products of PSD matrices are >= 0, so every alpha is <= 0 here.
    const BaseKernelBank pos = center_bank(gaussian_bank(X, std::vector<double>{0.3, 0.6}));
    const Matrix anti = -(pos.kernels[0] + pos.kernels[1]);
    CHECK_THROWS_AS(align_weights(pos, anti), DegenerateError);
}
