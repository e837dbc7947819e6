#ifndef LPMGH_LPMGH_HPP
#define LPMGH_LPMGH_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "lpmgh/anchor_graph.hpp"
#include "lpmgh/dataset.hpp"
#include "lpmgh/stiefel.hpp"

namespace lpmgh {

// n x r sign matrix, entries exactly +-1 stored as doubles so it composes
// with the dense algebra.
using CodeMatrix = Eigen::MatrixXd;

// Trained multiview hash model: per-view orthonormal projections, learned
// view weights on the simplex, and the normalization applied before
// projecting. Anchors are retained for provenance only; encoding does not
// touch them.
struct HashModel {
    int bits = 0;
    std::vector<Matrix> projections;   // W^(m), d_m x r
    Vector mu;                         // length M, positive
    std::vector<NormStats> norm_stats; // per view
    std::vector<AnchorSet> anchors;    // per view

    Eigen::Index view_count() const { return static_cast<Eigen::Index>(projections.size()); }
};

struct AnchorParams {
    Eigen::Index anchor_count = 0; // 0 = auto: min(300, n/2)
    int neighbors = 3;             // s nonzeros per Z row
    std::optional<double> bandwidth;
    int kmeans_iters = 25;
};

struct TrainConfig {
    int bits = 16;
    int max_outer_iters = 50;
    double rel_tol = 1e-6;
    double mu_init = 0.5;
    std::uint64_t seed = 0;
    AnchorParams anchor;
    StiefelOptions stiefel = trainer_stiefel_defaults();

    // The alternating loop re-solves each W subproblem from a warm start
    // every outer iteration over the gram form, where iterations cost
    // O(d^2 r), so a generous cap is affordable. The relative descent stop
    // lets warm-started late iterations exit after a handful of steps. It
    // has to sit far below the outer rel_tol: the mu update amplifies any
    // leftover slack in W through the 1/mu weights, and a sloppy inner
    // solve keeps the weights drifting long after B has frozen.
    static StiefelOptions trainer_stiefel_defaults() {
        StiefelOptions o;
        o.max_iters = 2000;
        o.rel_descent_tol = 1e-12;
        return o;
    }
};

struct TrainReport {
    double initial_objective = 0.0;
    std::vector<double> objective_per_iter; // after each full outer iteration
    std::vector<double> w_step_delta;       // objective change per step kind
    std::vector<double> mu_step_delta;
    std::vector<double> b_step_delta;
    std::vector<double> orthogonality_error_per_iter; // max over views
    int iters_run = 0;
    bool converged = false;
    Vector final_mu;
};

struct TrainResult {
    HashModel model;
    CodeMatrix codes;
    TrainReport report;
};

// Sum over views of -tr(W^T S W) + (1/mu) |B - X W|_F^2.
double objective(const std::vector<Matrix>& views, const std::vector<ScatterMatrix>& scatters,
                 const std::vector<Matrix>& projections, const Vector& mu, const CodeMatrix& codes);

// The W^(m) subproblem for fixed B and mu as a smooth objective with
// Euclidean gradient -2 S W + (2/mu) X^T (X W - B). Captures x, s, and
// codes by reference; evaluation costs O(n d r).
SmoothObjective projection_objective(const Matrix& x, const ScatterMatrix& s, const CodeMatrix& codes,
                                     double mu_m);

// The same subproblem expressed through gram = X^T X and xtb = X^T B, which
// drops the per-evaluation cost to O(d^2 r). Owns its state; the trainer uses
// this form so inner iterations stay cheap at large n.
SmoothObjective projection_objective_gram(const Matrix& gram, const ScatterMatrix& s,
                                          const Matrix& xtb, double mu_m, Eigen::Index n);

// Top-r eigenvectors of each scatter matrix, descending eigenvalue order,
// each column's largest-magnitude entry made positive.
std::vector<Matrix> init_projections(const std::vector<ScatterMatrix>& scatters, int bits);

CodeMatrix init_codes(Eigen::Index n, int bits); // all +1

Matrix update_projection(const Matrix& x, const ScatterMatrix& s, const CodeMatrix& codes,
                         double mu_m, const Matrix& w_current, const StiefelOptions& opts);

// Closed-form weight update mu_m = l_m / sum_i l_i with losses floored at
// 1e-12. Throws DegenerateError when every loss is zero.
Vector update_mu(const Vector& losses);

// Entrywise sign of sum_m X^(m) W^(m) / mu_m, with sign(0) := +1. Exact
// minimizer of the weighted quantization loss over sign matrices.
CodeMatrix update_codes(const std::vector<Matrix>& views, const std::vector<Matrix>& projections,
                        const Vector& mu);

TrainResult train(const MultiviewDataset& ds, const TrainConfig& cfg);

// Out-of-sample codes: normalization stats then the same weighted-sign rule
// used during training. Encoding the training views reproduces the stored
// codes bit for bit.
CodeMatrix encode(const HashModel& model, const std::vector<Matrix>& views);

} // namespace lpmgh

#endif
