#pragma once

#include <Eigen/Dense>

#include <vector>

namespace s2vr::solver {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct TrainConfig {
    double tau = 1.0;        ///< loss weight
    double gamma = 0.0;      ///< manifold weight
    double lambda = 0.0;     ///< l2,1 weight on the structure matrix
    double epsilon = 0.0;    ///< insensitivity radius of the loss
    int max_outer = 50;
    int max_irwls = 50;
    int max_s_iters = 50;
    double tol = 1e-8;       ///< relative objective change that ends a loop
    double smoothing = 1e-8; ///< floor on column norms in the l2,1 reweighting
    bool learn_structure = true;

    /// Throws ParameterError if any field is out of range.
    void validate() const;
};

/// Individual terms of the kernelized objective. `total` is their sum.
struct ObjectiveReport {
    double total = 0.0;
    double rkhs_term = 0.0;      ///< 1/2 tr(beta K beta^T)
    double manifold_term = 0.0;  ///< gamma/2 tr(F G F^T)
    double loss_term = 0.0;      ///< tau sum nu(u_i)
    double l21_term = 0.0;       ///< lambda sum_j ||S_j||
};

struct SolverFlags {
    bool line_search_failed = false;
    bool regularized_solve = false;
    bool max_iterations_reached = false;

    [[nodiscard]] bool any() const { return line_search_failed || regularized_solve || max_iterations_reached; }
    void merge(const SolverFlags& other);
};

struct SolverState {
    Matrix beta;                          ///< q x N kernel coefficients
    Matrix S;                             ///< q x q structure matrix
    std::vector<double> objective_trace;  ///< every accepted step, in order
    std::vector<double> outer_trace;      ///< objective after each outer iteration (entry 0 = start)
    Vector irwls_weights;                 ///< diagonal of D at the final iterate
    std::vector<bool> active_mask;        ///< u_i >= epsilon at the final iterate
    SolverFlags flags;
    int outer_iterations = 0;
    int irwls_iterations = 0;
    int s_iterations = 0;

    /// Fresh state: beta = 0, S = I.
    static SolverState initial(Eigen::Index outputs, Eigen::Index samples);
};

/// Residual-norm profile u_i = ||y_i - f(x_i)|| over the columns of E.
Vector residual_norms(const Matrix& E);

ObjectiveReport objective(const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y,
                          const TrainConfig& cfg);

/// IRWLS weights D_ii = 2 tau (u_i - eps) / u_i for u_i >= eps, else 0.
Vector irwls_weights(const Matrix& E, const TrainConfig& cfg);

/// Gradient of the objective with respect to beta (D recomputed from the residuals).
Matrix gradient_beta(const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y,
                     const TrainConfig& cfg);

/// Gradient with respect to S; the l2,1 part uses 2 lambda S P with the smoothed P.
Matrix gradient_S(const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y,
                  const TrainConfig& cfg);

/// Relative residual of beta K + S^T S beta K (gamma G + D) K - S^T Y D K = 0, normalized by
/// the sum of the three term norms.
double stationarity_residual(const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y,
                             const Vector& D, double gamma);

/// Minimizer of the IRWLS quadratic model for fixed S and weights D: solves the Sylvester
/// equation beta + (S^T S) beta (K (gamma G + D)) = S^T Y D.
Matrix solve_beta_step(const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y, const Vector& D,
                       const TrainConfig& cfg);

/// Adapted IRWLS with Armijo backtracking on the true objective. Appends to the state's trace.
SolverState irwls_optimize_beta(SolverState state, const Matrix& K, const Matrix& G, const Matrix& Y,
                                const TrainConfig& cfg);

/// Reweighted closed-form updates of S for fixed beta, safeguarded by backtracking.
/// Uses state.beta and state.S as the starting point; appends to the trace.
SolverState update_S(SolverState state, const Matrix& K, const Matrix& G, const Matrix& Y, const TrainConfig& cfg);

/// Alternates beta and S updates from beta = 0, S = I.
SolverState fit(const Matrix& K, const Matrix& G, const Matrix& Y, const TrainConfig& cfg);

/// Same as fit but starting from a given state.
SolverState fit_from(SolverState state, const Matrix& K, const Matrix& G, const Matrix& Y, const TrainConfig& cfg);

}  // namespace s2vr::solver
