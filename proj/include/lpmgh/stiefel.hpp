#ifndef LPMGH_STIEFEL_HPP
#define LPMGH_STIEFEL_HPP

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "lpmgh/dataset.hpp"

namespace lpmgh {

// Smooth function of a d x r matrix together with its Euclidean gradient.
// `value_and_gradient` is optional and lets callers share work (e.g. one
// X*W product feeding both); when absent the two plain callbacks are used.
struct SmoothObjective {
    std::function<double(const Matrix&)> value;
    std::function<Matrix(const Matrix&)> gradient;
    std::function<std::pair<double, Matrix>(const Matrix&)> value_and_gradient;

    std::pair<double, Matrix> eval(const Matrix& w) const {
        if (value_and_gradient) return value_and_gradient(w);
        return {value(w), gradient(w)};
    }
};

struct StiefelOptions {
    int max_iters = 100;
    double grad_tol = 1e-5;        // projected-gradient Frobenius norm
    double initial_step = 1e-3;
    double armijo_c = 1e-4;
    double step_shrink = 0.5;
    int nonmonotone_window = 5;    // Armijo reference = max of this many accepted values
    // Optional relative stop: finish once the BB step's first-order descent
    // prediction drops below this fraction of max(1, |f|). Off when 0. Lets a
    // warm-started solve exit cheaply instead of grinding toward grad_tol,
    // which is an absolute threshold and scales with the data.
    double rel_descent_tol = 0.0;
};

struct StiefelResult {
    Matrix w;
    std::vector<double> trace; // accepted objective values, trace[0] = f(W0)
    int iters = 0;
    double grad_norm = 0.0;
    bool converged = false; // projected gradient reached grad_tol
};

// Point on the Cayley curve through W along skew K = G W^T - W G^T:
// W(tau) = (I + tau/2 K)^-1 (I - tau/2 K) W, evaluated through the 2r x 2r
// Sherman-Morrison-Woodbury system so the cost stays O(d r^2). Orthonormal
// columns are preserved for every tau. Throws NumericError when the small
// solve is singular (tau too large; callers shrink and retry).
Matrix cayley_curve(const Matrix& w, const Matrix& g, double tau);

// Curvilinear search with Barzilai-Borwein steps and nonmonotone Armijo
// acceptance. Iterates stay feasible and the final value never exceeds the
// initial one.
StiefelResult minimize(const SmoothObjective& obj, Matrix w0, const StiefelOptions& opts = {});

// Thin QR with the R diagonal forced positive, so the result is unique.
Matrix orthonormalize(Matrix w);

// max |W^T W - I|
double orthogonality_error(const Matrix& w);

} // namespace lpmgh

#endif
