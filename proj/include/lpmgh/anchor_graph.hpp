#ifndef LPMGH_ANCHOR_GRAPH_HPP
#define LPMGH_ANCHOR_GRAPH_HPP

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <optional>

#include "lpmgh/dataset.hpp"

namespace lpmgh {

// d x d scatter X^T A X; symmetric PSD by construction.
using ScatterMatrix = Eigen::MatrixXd;

struct AnchorSet {
    Matrix centers; // P x d
    int view_index = 0;
    Eigen::Index count() const { return centers.rows(); }
};

// Sparse factorization of the affinity A = Z diag(lambda)^-1 Z^T. Z rows
// sum to one and lambda holds the Z column masses, so A 1 = 1 and the
// implied degree matrix is exactly the identity.
struct AnchorGraphFactor {
    Eigen::SparseMatrix<double, Eigen::RowMajor> z; // n x P, <= s nonzeros per row
    Vector lambda;                                  // P, strictly positive
    int s = 0;
};

// Lloyd's k-means with seeded k-means++ initialization; empty clusters are
// reseeded to the farthest point. Ties always break toward the lower index.
AnchorSet select_anchors(const Matrix& x, Eigen::Index anchor_count, std::uint64_t seed,
                         int max_iters = 25, int view_index = 0);

// Gaussian weights exp(-dist^2 / sigma^2) over each row's s nearest anchors,
// renormalized to sum one. bandwidth = nullopt picks sigma as the mean
// distance to the s-th nearest anchor. Anchors with zero column mass are
// dropped so lambda stays invertible.
AnchorGraphFactor build_factor(const Matrix& x, const AnchorSet& anchors, int s,
                               std::optional<double> bandwidth = std::nullopt);

// X^T Z lambda^-1 Z^T X through the P-dimensional factor; never forms A.
ScatterMatrix scatter_matrix(const Matrix& x, const AnchorGraphFactor& f);

// Materialized n x n affinity, for diagnostics and small-instance tests.
Matrix dense_affinity(const AnchorGraphFactor& f);

} // namespace lpmgh

#endif
