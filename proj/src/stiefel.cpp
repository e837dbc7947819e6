#include "lpmgh/stiefel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "lpmgh/error.hpp"

namespace lpmgh {

namespace {

constexpr double kStepFloor = 1e-10;
constexpr double kStepCeil = 1e2;
constexpr int kMaxBacktracks = 40;
constexpr int kReorthonormalizeEvery = 50;

Matrix tangent_project(const Matrix& w, const Matrix& g) {
    const Matrix wtg = w.transpose() * g;
    return g - w * (0.5 * (wtg + wtg.transpose()));
}

} // namespace

Matrix cayley_curve(const Matrix& w, const Matrix& g, double tau) {
    if (w.rows() != g.rows() || w.cols() != g.cols())
        throw ShapeError("cayley_curve: W and G shapes differ");
    if (tau < 0.0) throw ConfigError("cayley_curve: tau must be nonnegative");
    if (tau == 0.0) return w;

    const Eigen::Index d = w.rows();
    const Eigen::Index r = w.cols();
    if (2 * r >= d) {
        // wide case: solve with K = G W^T - W G^T directly, the d x d system
        // is smaller than the 2r x 2r one below
        const Matrix gwt = g * w.transpose();
        const Matrix k = gwt - gwt.transpose();
        Matrix system = Matrix::Identity(d, d) + (0.5 * tau) * k;
        Eigen::FullPivLU<Matrix> lu(system);
        if (!lu.isInvertible())
            throw NumericError("cayley_curve: singular Cayley system, shrink tau");
        return lu.solve(w - (0.5 * tau) * (k * w));
    }

    // K = U V^T with U = [G W], V = [W -G]
    Matrix u(d, 2 * r);
    u.leftCols(r) = g;
    u.rightCols(r) = w;
    Matrix vt(2 * r, d);
    vt.topRows(r) = w.transpose();
    vt.bottomRows(r) = -g.transpose();

    Matrix system = Matrix::Identity(2 * r, 2 * r) + (0.5 * tau) * (vt * u);
    Eigen::FullPivLU<Matrix> lu(system);
    if (!lu.isInvertible())
        throw NumericError("cayley_curve: singular SMW system, shrink tau");
    return w - tau * (u * lu.solve(vt * w));
}

Matrix orthonormalize(Matrix w) {
    Eigen::HouseholderQR<Matrix> qr(w);
    Matrix q = qr.householderQ() * Matrix::Identity(w.rows(), w.cols());
    const Matrix r = qr.matrixQR().topRows(w.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

double orthogonality_error(const Matrix& w) {
    return (w.transpose() * w - Matrix::Identity(w.cols(), w.cols())).cwiseAbs().maxCoeff();
}

StiefelResult minimize(const SmoothObjective& obj, Matrix w0, const StiefelOptions& opts) {
    if (orthogonality_error(w0) > 1e-8)
        throw ValueError("minimize: W0 does not have orthonormal columns");
    if (opts.max_iters < 0 || opts.grad_tol <= 0.0 || opts.initial_step <= 0.0 ||
        opts.armijo_c <= 0.0 || opts.armijo_c >= 1.0 || opts.step_shrink <= 0.0 ||
        opts.step_shrink >= 1.0 || opts.nonmonotone_window < 1 || opts.rel_descent_tol < 0.0)
        throw ConfigError("minimize: options out of range");

    StiefelResult res;
    res.w = std::move(w0);

    auto [f, grad] = obj.eval(res.w);
    if (!std::isfinite(f) || !grad.allFinite())
        throw NumericError("minimize: objective returned NaN/Inf");
    res.trace.push_back(f);

    Matrix pg = tangent_project(res.w, grad);
    double pg_norm = pg.norm();
    std::deque<double> window{f};
    double tau = opts.initial_step;
    int accepts = 0;

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (pg_norm <= opts.grad_tol) {
            res.converged = true;
            break;
        }

        // directional derivative along the Cayley curve at tau = 0:
        // f'(0) = -(|G|_F^2 - tr((W^T G)^2)) = -1/2 |K|_F^2
        const Matrix wtg = res.w.transpose() * grad;
        const double descent = -(grad.squaredNorm() - (wtg * wtg).trace());
        // relative stop; skipped on the first pass, where tau is still the
        // conservative initial step rather than a BB curvature estimate
        if (opts.rel_descent_tol > 0.0 && iter > 0 &&
            -tau * descent <= opts.rel_descent_tol * std::max(1.0, std::abs(f))) {
            res.converged = true;
            break;
        }
        const double reference = *std::max_element(window.begin(), window.end());

        double t = tau;
        double f_trial = f;
        Matrix w_trial;
        bool accepted = false;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            bool usable = true;
            try {
                w_trial = cayley_curve(res.w, grad, t);
            } catch (const NumericError&) {
                usable = false;
            }
            if (usable) {
                f_trial = obj.value ? obj.value(w_trial) : obj.eval(w_trial).first;
                usable = std::isfinite(f_trial) &&
                         f_trial <= reference + opts.armijo_c * t * descent;
            }
            if (usable) {
                accepted = true;
                break;
            }
            t *= opts.step_shrink;
            if (t < kStepFloor) break;
        }
        if (!accepted) break; // stalled at the step floor; W stays feasible

        const Matrix w_prev = std::move(res.w);
        const Matrix pg_prev = std::move(pg);
        res.w = std::move(w_trial);
        ++accepts;
        if (accepts % kReorthonormalizeEvery == 0) res.w = orthonormalize(res.w);

        std::tie(f, grad) = obj.eval(res.w);
        if (!std::isfinite(f) || !grad.allFinite())
            throw NumericError("minimize: objective returned NaN/Inf");
        res.trace.push_back(f);
        res.iters = iter + 1;
        window.push_back(f);
        if (static_cast<int>(window.size()) > opts.nonmonotone_window) window.pop_front();

        pg = tangent_project(res.w, grad);
        pg_norm = pg.norm();

        // alternating Barzilai-Borwein step for the next trial
        const Matrix sd = res.w - w_prev;
        const Matrix yd = pg - pg_prev;
        const double sy = std::abs((sd.array() * yd.array()).sum());
        double next = t;
        if (sy > 0.0) {
            next = (iter % 2 == 0) ? sd.squaredNorm() / sy : sy / yd.squaredNorm();
        }
        if (!std::isfinite(next) || next <= 0.0) next = t;
        tau = std::clamp(next, kStepFloor, kStepCeil);
    }

    res.grad_norm = pg_norm;
    if (pg_norm <= opts.grad_tol) res.converged = true;
    return res;
}

} // namespace lpmgh
