#pragma once

#include <Eigen/Dense>

#include <optional>

namespace s2vr::graph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Fully connected Gaussian similarity graph over output vectors.
struct OutputGraph {
    Matrix similarity;  ///< E, E_ii = 1
    Vector degree;      ///< diagonal of D-hat (row sums of E)
    Matrix laplacian;   ///< G = D-hat - E
    double rho = 0.0;
};

/// Median of the pairwise Euclidean distances between the columns of Y.
double median_pairwise_distance(const Matrix& Y);

/// Unnormalized Laplacian of the Gaussian similarity graph over the columns of Y (q x N).
/// rho defaults to the median pairwise output distance.
OutputGraph build_laplacian(const Matrix& Y, std::optional<double> rho = std::nullopt);

/// tr(F G F^T) for predictions F stored q x N.
double manifold_penalty(const Matrix& F, const Matrix& laplacian);
double manifold_penalty(const Matrix& F, const OutputGraph& graph);

}  // namespace s2vr::graph
