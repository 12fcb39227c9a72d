#include "s2vr/errors.hpp"
#include "s2vr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace s2vr::kernels {

namespace {

double qp_objective(const Matrix& V, const Vector& alpha, const Vector& q) {
    return q.dot(V * q) - 2.0 * q.dot(alpha);
}

// Projected-gradient norm: zero exactly at a KKT point.
double projected_gradient_norm(const Vector& q, const Vector& grad) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        const double g = (q[i] > 0.0) ? grad[i] : std::min(grad[i], 0.0);
        acc += g * g;
    }
    return std::sqrt(acc);
}

// Primal active-set iterations started from a feasible point. Returns false if it
// could not reach a KKT point within the iteration budget.
bool active_set_polish(const Matrix& V, const Vector& alpha, Vector& q, int max_iterations, double tol) {
    const Eigen::Index m = q.size();
    std::vector<bool> free(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) free[static_cast<std::size_t>(i)] = q[i] > 0.0;

    for (int it = 0; it < max_iterations; ++it) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < m; ++i)
            if (free[static_cast<std::size_t>(i)]) idx.push_back(i);

        Vector x = Vector::Zero(m);
        if (!idx.empty()) {
            const auto f = static_cast<Eigen::Index>(idx.size());
            Matrix Vff(f, f);
            Vector af(f);
            for (Eigen::Index a = 0; a < f; ++a) {
                af[a] = alpha[idx[static_cast<std::size_t>(a)]];
                for (Eigen::Index b = 0; b < f; ++b)
                    Vff(a, b) = V(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
            }
            const Vector xf = Vff.completeOrthogonalDecomposition().solve(af);
            for (Eigen::Index a = 0; a < f; ++a) x[idx[static_cast<std::size_t>(a)]] = xf[a];
        }

        bool feasible = true;
        for (Eigen::Index i : idx)
            if (x[i] <= 0.0) feasible = false;

        if (feasible) {
            q = x;
            const Vector grad = 2.0 * (V * q - alpha);
            Eigen::Index worst = -1;
            double worst_value = -tol;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (!free[static_cast<std::size_t>(i)] && grad[i] < worst_value) {
                    worst_value = grad[i];
                    worst = i;
                }
            }
            if (worst < 0) return true;
            free[static_cast<std::size_t>(worst)] = true;
            continue;
        }

        // Step from q towards x until the first free coordinate hits zero.
        double t = 1.0;
        for (Eigen::Index i : idx) {
            if (x[i] <= 0.0) {
                const double denom = q[i] - x[i];
                if (denom > 0.0) t = std::min(t, q[i] / denom);
            }
        }
        q += t * (x - q);
        for (Eigen::Index i : idx) {
            if (q[i] <= 0.0 || (x[i] <= 0.0 && q[i] <= 1e-300)) {
                q[i] = 0.0;
                free[static_cast<std::size_t>(i)] = false;
            }
        }
        // Guarantee progress if no coordinate was released.
        bool released = false;
        for (Eigen::Index i : idx)
            if (!free[static_cast<std::size_t>(i)]) released = true;
        if (!released) {
            Eigen::Index arg = idx.front();
            for (Eigen::Index i : idx)
                if (x[i] < x[arg]) arg = i;
            q[arg] = 0.0;
            free[static_cast<std::size_t>(arg)] = false;
        }
    }
    return false;
}

}  // namespace

bool QpKkt::satisfied(double alpha_norm, double tol) const {
    return min_entry >= 0.0 && min_gradient >= -tol && max_slackness <= tol * (1.0 + alpha_norm);
}

QpKkt qp_kkt(const Matrix& V, const Vector& alpha, const Vector& q) {
    const Vector r = V * q - alpha;
    QpKkt k;
    k.min_gradient = (2.0 * r).minCoeff();
    k.max_slackness = (q.array() * r.array()).abs().maxCoeff();
    k.min_entry = q.minCoeff();
    return k;
}

QpResult solve_nonneg_qp(const Matrix& V, const Vector& alpha, const QpOptions& options) {
    const Eigen::Index m = V.rows();
    if (V.cols() != m || alpha.size() != m || m == 0) {
        throw ShapeError("solve_nonneg_qp: V must be square and match alpha");
    }
    const double vscale = std::max(V.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if (!(V - V.transpose()).isZero(1e-12 * vscale)) {
        throw ShapeError("solve_nonneg_qp: V is not symmetric");
    }
    if (!V.allFinite() || !alpha.allFinite()) throw ParameterError("solve_nonneg_qp: non-finite input");

    // The minimizer is unchanged when V and alpha are scaled together; work at unit scale.
    const Matrix Vs = V / vscale;
    const Vector as = alpha / vscale;
    const double alpha_norm = as.norm();

    Vector q = Vector::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (Vs(i, i) > 0.0) q[i] = std::max(0.0, as[i] / Vs(i, i));
    }
    // Start from the better of the diagonal guess and the origin.
    if (qp_objective(Vs, as, q) > 0.0) q.setZero();

    QpResult result;
    double step = 1.0;
    const int polish_every = 50;
    for (int it = 1; it <= options.max_iterations; ++it) {
        const Vector grad = 2.0 * (Vs * q - as);
        const double f = qp_objective(Vs, as, q);
        if (projected_gradient_norm(q, grad) <= 1e-15 * (1.0 + alpha_norm)) {
            result.iterations = it;
            break;
        }
        step = std::min(1.0, step / options.shrink);
        Vector trial;
        while (true) {
            trial = (q - step * grad).cwiseMax(0.0);
            const double ft = qp_objective(Vs, as, trial);
            if (ft <= f + options.armijo * grad.dot(trial - q)) break;
            step *= options.shrink;
            if (step < options.min_step) break;
        }
        if (step >= options.min_step) q = trial;

        if (it % polish_every == 0 || step < options.min_step || it == options.max_iterations) {
            Vector candidate = q;
            if (active_set_polish(Vs, as, candidate, 4 * static_cast<int>(m) + 20, 1e-14)) {
                const QpKkt kkt = qp_kkt(V, alpha, candidate);
                if (kkt.satisfied(alpha.norm())) {
                    result.q = candidate;
                    result.iterations = it;
                    result.objective = qp_objective(V, alpha, candidate);
                    return result;
                }
            }
            if (step < options.min_step) step = 1.0;
        }
        result.iterations = it;
    }

    Vector candidate = q;
    active_set_polish(Vs, as, candidate, 4 * static_cast<int>(m) + 20, 1e-14);
    const Vector& best = qp_objective(Vs, as, candidate) <= qp_objective(Vs, as, q) ? candidate : q;
    if (!qp_kkt(V, alpha, best).satisfied(alpha.norm())) {
        throw SolverError("solve_nonneg_qp: no KKT point reached within " + std::to_string(options.max_iterations) +
                          " iterations");
    }
    result.q = best;
    result.objective = qp_objective(V, alpha, best);
    return result;
}

}  // namespace s2vr::kernels
