#include "s2vr/solver.hpp"

#include "s2vr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace s2vr::solver {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr double kMinStep = 1e-10;

void check_shapes(const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y) {
    const Eigen::Index q = Y.rows();
    const Eigen::Index n = Y.cols();
    if (K.rows() != n || K.cols() != n) throw ShapeError("solver: K must be N x N with N = " + std::to_string(n));
    if (G.rows() != n || G.cols() != n) throw ShapeError("solver: G must be N x N with N = " + std::to_string(n));
    if (beta.rows() != q || beta.cols() != n) throw ShapeError("solver: beta must be q x N");
    if (S.rows() != q || S.cols() != q) throw ShapeError("solver: S must be q x q");
}

bool small_change(double before, double after, double tol) {
    return std::abs(before - after) <= tol * std::max(1.0, std::abs(before));
}

// Symmetric eigendecomposition with eigenvalues clamped at zero.
Eigen::SelfAdjointEigenSolver<Matrix> psd_eigen(const Matrix& A) {
    const Matrix sym = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) throw SolverError("eigendecomposition failed");
    return es;
}

struct StepOutcome {
    bool accepted = false;
    bool converged = false;
    double value = 0.0;
    double step = 0.0;
};

// Armijo backtracking along `direction` from the current point. `eval(step)` returns the
// true objective at current + step * direction.
template <typename Eval>
StepOutcome backtrack(double current, double slope, Eval&& eval) {
    StepOutcome out;
    // Stationary up to rounding: nothing left to gain along this direction.
    if (slope >= -1e-14 * (1.0 + std::abs(current))) {
        out.converged = true;
        return out;
    }
    double step = 1.0;
    while (step >= kMinStep) {
        const double trial = eval(step);
        if (std::isfinite(trial) && trial <= current + kArmijo * step * slope) {
            out.accepted = true;
            out.value = trial;
            out.step = step;
            return out;
        }
        step *= kShrink;
    }
    // A failure at rounding scale is convergence, not a solver problem.
    out.converged = std::abs(slope) <= 1e-10 * (1.0 + std::abs(current));
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!(tau > 0.0) || !finite(tau)) throw ParameterError("tau must be positive");
    if (!(gamma >= 0.0) || !finite(gamma)) throw ParameterError("gamma must be nonnegative");
    if (!(lambda >= 0.0) || !finite(lambda)) throw ParameterError("lambda must be nonnegative");
    if (!(epsilon >= 0.0) || !finite(epsilon)) throw ParameterError("epsilon must be nonnegative");
    if (!(tol > 0.0) || !finite(tol)) throw ParameterError("tol must be positive");
    if (!(smoothing > 0.0) || !finite(smoothing)) throw ParameterError("smoothing must be positive");
    if (max_outer < 0 || max_irwls < 0 || max_s_iters < 0) throw ParameterError("iteration limits must be >= 0");
}

void SolverFlags::merge(const SolverFlags& other) {
    line_search_failed = line_search_failed || other.line_search_failed;
    regularized_solve = regularized_solve || other.regularized_solve;
    max_iterations_reached = max_iterations_reached || other.max_iterations_reached;
}

SolverState SolverState::initial(Eigen::Index outputs, Eigen::Index samples) {
    SolverState s;
    s.beta = Matrix::Zero(outputs, samples);
    s.S = Matrix::Identity(outputs, outputs);
    s.irwls_weights = Vector::Zero(samples);
    s.active_mask.assign(static_cast<std::size_t>(samples), false);
    return s;
}

Vector residual_norms(const Matrix& E) {
    return E.colwise().norm().transpose();
}

ObjectiveReport objective(const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y,
                          const TrainConfig& cfg) {
    check_shapes(beta, S, K, G, Y);
    const Matrix Z = beta * K;
    const Matrix F = S * Z;
    const Vector u = residual_norms(Y - F);

    ObjectiveReport r;
    r.rkhs_term = 0.5 * (beta.array() * Z.array()).sum();
    r.manifold_term = cfg.gamma == 0.0 ? 0.0 : 0.5 * cfg.gamma * (F.array() * (F * G).array()).sum();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u[i] >= cfg.epsilon) {
            const double excess = u[i] - cfg.epsilon;
            loss += excess * excess;
        }
    }
    r.loss_term = cfg.tau * loss;
    r.l21_term = cfg.lambda * S.colwise().norm().sum();
    r.total = r.rkhs_term + r.manifold_term + r.loss_term + r.l21_term;
    return r;
}

Vector irwls_weights(const Matrix& E, const TrainConfig& cfg) {
    const Vector u = residual_norms(E);
    Vector d = Vector::Zero(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u[i] >= cfg.epsilon && u[i] > 0.0) d[i] = 2.0 * cfg.tau * (u[i] - cfg.epsilon) / u[i];
    }
    return d;
}

Matrix gradient_beta(const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y,
                     const TrainConfig& cfg) {
    check_shapes(beta, S, K, G, Y);
    const Matrix Z = beta * K;
    const Matrix F = S * Z;
    const Matrix E = Y - F;
    const Vector D = irwls_weights(E, cfg);
    Matrix dF = -(E * D.asDiagonal());
    if (cfg.gamma != 0.0) dF.noalias() += cfg.gamma * (F * G);
    return Z + S.transpose() * dF * K;
}

Matrix gradient_S(const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y,
                  const TrainConfig& cfg) {
    check_shapes(beta, S, K, G, Y);
    const Matrix Z = beta * K;
    const Matrix F = S * Z;
    const Matrix E = Y - F;
    const Vector D = irwls_weights(E, cfg);
    Matrix dF = -(E * D.asDiagonal());
    if (cfg.gamma != 0.0) dF.noalias() += cfg.gamma * (F * G);
    Matrix grad = dF * Z.transpose();
    if (cfg.lambda != 0.0) {
        for (Eigen::Index j = 0; j < S.cols(); ++j) {
            grad.col(j) += cfg.lambda / std::max(S.col(j).norm(), cfg.smoothing) * S.col(j);
        }
    }
    return grad;
}

double stationarity_residual(const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y,
                             const Vector& D, double gamma) {
    check_shapes(beta, S, K, G, Y);
    Matrix H = gamma * G;
    H.diagonal() += D;
    const Matrix t1 = beta * K;
    const Matrix t2 = S.transpose() * S * t1 * H * K;
    const Matrix t3 = S.transpose() * Y * D.asDiagonal() * K;
    const double scale = t1.norm() + t2.norm() + t3.norm();
    if (scale == 0.0) return 0.0;
    return (t1 + t2 - t3).norm() / scale;
}

Matrix solve_beta_step(const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y, const Vector& D,
                       const TrainConfig& cfg) {
    const Eigen::Index q = Y.rows();
    const Eigen::Index n = Y.cols();
    check_shapes(Matrix::Zero(q, n), S, K, G, Y);
    if (D.size() != n) throw ShapeError("solve_beta_step: D must have N entries");
    if ((D.array() < 0.0).any()) throw ParameterError("solve_beta_step: D must be nonnegative");

    // beta + A beta K H = C with A = S^T S, H = gamma G + D, C = S^T Y D.
    // Diagonalize A = V diag(lambda) V^T; each row of V^T beta then solves
    // x (I + lambda K H) = c, inverted through the push-through identity
    // (I + l K H)^-1 = I - l K H^1/2 (I + l W)^-1 H^1/2, W = H^1/2 K H^1/2.
    Matrix H = cfg.gamma * G;
    H.diagonal() += D;
    const auto h_eig = psd_eigen(H);
    const Vector h_vals = h_eig.eigenvalues().cwiseMax(0.0);
    const Matrix H_half = h_eig.eigenvectors() * h_vals.cwiseSqrt().asDiagonal() * h_eig.eigenvectors().transpose();

    const Matrix W = H_half * K * H_half;
    const auto w_eig = psd_eigen(W);
    const Vector sigma = w_eig.eigenvalues().cwiseMax(0.0);
    const Matrix& U = w_eig.eigenvectors();

    const auto a_eig = psd_eigen(S.transpose() * S);
    const Vector lam = a_eig.eigenvalues().cwiseMax(0.0);
    const Matrix& V = a_eig.eigenvectors();

    const Matrix C = S.transpose() * Y * D.asDiagonal();
    const Matrix Ct = V.transpose() * C;
    Matrix P = Ct * K * H_half * U;
    for (Eigen::Index i = 0; i < q; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) P(i, j) *= lam[i] / (1.0 + lam[i] * sigma[j]);
    }
    const Matrix beta_t = Ct - P * U.transpose() * H_half;
    return V * beta_t;
}

SolverState irwls_optimize_beta(SolverState state, const Matrix& K, const Matrix& G, const Matrix& Y,
                                const TrainConfig& cfg) {
    cfg.validate();
    check_shapes(state.beta, state.S, K, G, Y);
    double current = objective(state.beta, state.S, K, G, Y, cfg).total;
    bool finished = false;
    for (int k = 0; k < cfg.max_irwls; ++k) {
        const Matrix E = Y - state.S * state.beta * K;
        const Vector D = irwls_weights(E, cfg);
        const Matrix target = solve_beta_step(state.S, K, G, Y, D, cfg);
        const Matrix direction = target - state.beta;
        const double slope = (gradient_beta(state.beta, state.S, K, G, Y, cfg).array() * direction.array()).sum();

        const StepOutcome step = backtrack(current, slope, [&](double eta) {
            return objective(state.beta + eta * direction, state.S, K, G, Y, cfg).total;
        });
        if (!step.accepted) {
            if (!step.converged) state.flags.line_search_failed = true;
            finished = true;
            break;
        }
        state.beta += step.step * direction;
        state.objective_trace.push_back(step.value);
        ++state.irwls_iterations;
        const bool done = small_change(current, step.value, cfg.tol);
        current = step.value;
        if (done) {
            finished = true;
            break;
        }
    }
    if (!finished && cfg.max_irwls > 0) state.flags.max_iterations_reached = true;

    const Matrix E = Y - state.S * state.beta * K;
    state.irwls_weights = irwls_weights(E, cfg);
    const Vector u = residual_norms(E);
    state.active_mask.assign(static_cast<std::size_t>(u.size()), false);
    for (Eigen::Index i = 0; i < u.size(); ++i) state.active_mask[static_cast<std::size_t>(i)] = u[i] >= cfg.epsilon;
    return state;
}

SolverState update_S(SolverState state, const Matrix& K, const Matrix& G, const Matrix& Y, const TrainConfig& cfg) {
    cfg.validate();
    check_shapes(state.beta, state.S, K, G, Y);
    const Eigen::Index q = Y.rows();
    const Matrix Z = state.beta * K;
    const Matrix ZGZ = cfg.gamma == 0.0 ? Matrix::Zero(q, q) : Matrix(Z * G * Z.transpose());
    double current = objective(state.beta, state.S, K, G, Y, cfg).total;
    bool finished = false;
    for (int t = 0; t < cfg.max_s_iters; ++t) {
        const Matrix E = Y - state.S * Z;
        const Vector D = irwls_weights(E, cfg);
        Matrix bracket = Z * D.asDiagonal() * Z.transpose() + cfg.gamma * ZGZ;
        if (cfg.lambda != 0.0) {
            for (Eigen::Index j = 0; j < q; ++j) {
                bracket(j, j) += cfg.lambda / std::max(state.S.col(j).norm(), cfg.smoothing);
            }
        }
        bracket = 0.5 * (bracket + bracket.transpose());
        const Matrix rhs = (Y * D.asDiagonal() * Z.transpose()).transpose();

        Matrix next;
        Eigen::LLT<Matrix> llt(bracket);
        bool ok = llt.info() == Eigen::Success;
        if (ok) {
            next = llt.solve(rhs).transpose();
            ok = next.allFinite();
        }
        if (!ok) {
            const double ridge = 1e-10 * std::max(bracket.trace(), 1e-300);
            Matrix reg = bracket;
            reg.diagonal().array() += ridge;
            next = reg.ldlt().solve(rhs).transpose();
            state.flags.regularized_solve = true;
            if (!next.allFinite()) {
                finished = true;
                break;
            }
        }

        const Matrix direction = next - state.S;
        const double slope = (gradient_S(state.beta, state.S, K, G, Y, cfg).array() * direction.array()).sum();
        const StepOutcome step = backtrack(current, slope, [&](double eta) {
            return objective(state.beta, state.S + eta * direction, K, G, Y, cfg).total;
        });
        if (!step.accepted) {
            if (!step.converged) state.flags.line_search_failed = true;
            finished = true;
            break;
        }
        state.S += step.step * direction;
        state.objective_trace.push_back(step.value);
        ++state.s_iterations;
        const bool done = small_change(current, step.value, cfg.tol);
        current = step.value;
        if (done) {
            finished = true;
            break;
        }
    }
    if (!finished && cfg.max_s_iters > 0) state.flags.max_iterations_reached = true;
    return state;
}

SolverState fit_from(SolverState state, const Matrix& K, const Matrix& G, const Matrix& Y, const TrainConfig& cfg) {
    cfg.validate();
    check_shapes(state.beta, state.S, K, G, Y);
    double current = objective(state.beta, state.S, K, G, Y, cfg).total;
    if (state.objective_trace.empty()) state.objective_trace.push_back(current);
    state.outer_trace.push_back(current);

    for (int outer = 0; outer < cfg.max_outer; ++outer) {
        state = irwls_optimize_beta(std::move(state), K, G, Y, cfg);
        if (cfg.learn_structure) state = update_S(std::move(state), K, G, Y, cfg);
        const double next = objective(state.beta, state.S, K, G, Y, cfg).total;
        state.outer_trace.push_back(next);
        ++state.outer_iterations;
        const bool done = small_change(current, next, cfg.tol);
        current = next;
        if (done) break;
        if (outer + 1 == cfg.max_outer) state.flags.max_iterations_reached = true;
    }

    const Matrix E = Y - state.S * state.beta * K;
    state.irwls_weights = irwls_weights(E, cfg);
    const Vector u = residual_norms(E);
    state.active_mask.assign(static_cast<std::size_t>(u.size()), false);
    for (Eigen::Index i = 0; i < u.size(); ++i) state.active_mask[static_cast<std::size_t>(i)] = u[i] >= cfg.epsilon;
    return state;
}

SolverState fit(const Matrix& K, const Matrix& G, const Matrix& Y, const TrainConfig& cfg) {
    return fit_from(SolverState::initial(Y.rows(), Y.cols()), K, G, Y, cfg);
}

}  // namespace s2vr::solver
