#include "s2vr/errors.hpp"
#include "s2vr/graph.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

using namespace s2vr;
using namespace s2vr::graph;
using s2vr::testing::random_matrix;

TEST_CASE("identical outputs") {
    const Matrix Y = Matrix::Ones(3, 2);
    const OutputGraph g = build_laplacian(Y, 1.0);
    CHECK(g.similarity.isOnes(0.0));
    Matrix expected(2, 2);
    expected << 1, -1, -1, 1;
    CHECK(g.laplacian == expected);
}

TEST_CASE("equilateral outputs at distance rho sqrt 2") {
    const double rho = 0.8;
    Matrix Y = Matrix::Identity(3, 3) * rho;  // pairwise distance rho * sqrt(2)
    const OutputGraph g = build_laplacian(Y, rho);
    const double e = std::exp(-1.0);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i != j) CHECK(g.similarity(i, j) == doctest::Approx(e).epsilon(1e-14));
        }
        CHECK(g.laplacian(i, i) == doctest::Approx(2 * e).epsilon(1e-14));
    }
}

TEST_CASE("laplacian invariants") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        const Matrix Y = random_matrix(rng, 4, 15);
        const OutputGraph g = build_laplacian(Y);
        CHECK(g.rho > 0.0);
        CHECK(g.similarity.diagonal().isOnes(0.0));
        CHECK((g.laplacian - g.laplacian.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.laplacian.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
        CHECK((g.similarity.array() >= 0.0).all());
        const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(g.laplacian).eigenvalues().minCoeff();
        CHECK(lo >= -1e-8 * g.laplacian.trace() / 15.0);
    }
}

TEST_CASE("automatic rho is the median pairwise distance") {
    Matrix Y(1, 4);
    Y << 0, 1, 3, 7;
    // distances 1, 3, 7, 2, 6, 4 -> median (3 + 4) / 2
    CHECK(median_pairwise_distance(Y) == doctest::Approx(3.5));
    CHECK(build_laplacian(Y).rho == doctest::Approx(3.5));
}

TEST_CASE("permutation of samples permutes the laplacian") {
    std::mt19937_64 rng(12);
    const Matrix Y = random_matrix(rng, 3, 9);
    std::vector<int> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix Yp(3, 9);
    for (int i = 0; i < 9; ++i) Yp.col(i) = Y.col(perm[i]);
    const Matrix G = build_laplacian(Y, 1.3).laplacian;
    const Matrix Gp = build_laplacian(Yp, 1.3).laplacian;
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) CHECK(std::abs(Gp(i, j) - G(perm[i], perm[j])) <= 1e-12);
}

TEST_CASE("manifold penalty") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 50; ++t) {
        const Matrix Y = random_matrix(rng, 3, 8);
        const Matrix F = random_matrix(rng, 5, 8);
        const OutputGraph g = build_laplacian(Y);
        double pairwise = 0.0;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) pairwise += 0.5 * g.similarity(i, j) * (F.col(i) - F.col(j)).squaredNorm();
        CHECK(manifold_penalty(F, g) == doctest::Approx(pairwise).epsilon(1e-10));
        CHECK(manifold_penalty(F, g) >= 0.0);
        CHECK(manifold_penalty(Matrix(2.0 * F), g) == doctest::Approx(4.0 * manifold_penalty(F, g)).epsilon(1e-12));
    }
    const Matrix constant = Vector::LinSpaced(4, 1, 4) * Eigen::RowVectorXd::Ones(6);
    CHECK(manifold_penalty(constant, build_laplacian(random_matrix(rng, 2, 6))) <= 1e-12);
}

TEST_CASE("graph errors") {
    CHECK_THROWS_AS(build_laplacian(Matrix::Ones(3, 1)), DataError);
    CHECK_THROWS_AS(build_laplacian(Matrix::Ones(3, 4), -1.0), ParameterError);
    CHECK_THROWS_AS(manifold_penalty(Matrix::Ones(2, 3), Matrix::Identity(4, 4)), ShapeError);
}
