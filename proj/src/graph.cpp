#include "s2vr/graph.hpp"

#include "s2vr/errors.hpp"
#include "s2vr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace s2vr::graph {

double median_pairwise_distance(const Matrix& Y) {
    const Eigen::Index n = Y.cols();
    if (n < 2) throw DataError("median_pairwise_distance: need at least 2 samples");
    const Matrix sq = kernels::squared_distances(Y, Y);
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index j = 1; j < n; ++j)
        for (Eigen::Index i = 0; i < j; ++i) d.push_back(std::sqrt(sq(i, j)));
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double median = *mid;
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), mid);
        median = 0.5 * (median + lower);
    }
    return median;
}

OutputGraph build_laplacian(const Matrix& Y, std::optional<double> rho) {
    const Eigen::Index n = Y.cols();
    if (n < 2) throw DataError("build_laplacian: need at least 2 samples, got " + std::to_string(n));
    double width = 0.0;
    if (rho) {
        width = *rho;
        if (!(width > 0.0) || !std::isfinite(width)) {
            throw ParameterError("build_laplacian: rho must be positive, got " + std::to_string(width));
        }
    } else {
        width = median_pairwise_distance(Y);
        if (!(width > 0.0)) {
            // More than half the pairs coincide; fall back to the mean distance.
            const Matrix sq = kernels::squared_distances(Y, Y);
            width = sq.cwiseSqrt().sum() / static_cast<double>(n * (n - 1));
        }
        if (!(width > 0.0)) width = 1.0;
    }

    OutputGraph g;
    g.rho = width;
    g.similarity = kernels::gaussian_kernel(Y, Y, width);
    g.degree = g.similarity.rowwise().sum();
    g.laplacian = -g.similarity;
    g.laplacian.diagonal() += g.degree;
    return g;
}

double manifold_penalty(const Matrix& F, const Matrix& laplacian) {
    if (laplacian.rows() != laplacian.cols() || F.cols() != laplacian.rows()) {
        throw ShapeError("manifold_penalty: F has " + std::to_string(F.cols()) + " columns, Laplacian is " +
                         std::to_string(laplacian.rows()) + "x" + std::to_string(laplacian.cols()));
    }
    const double value = (F.array() * (F * laplacian).array()).sum();
    return std::max(value, 0.0);
}

double manifold_penalty(const Matrix& F, const OutputGraph& graph) {
    return manifold_penalty(F, graph.laplacian);
}

}  // namespace s2vr::graph
