#include "lpmgh/anchor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lpmgh/error.hpp"
#include "lpmgh/parallel.hpp"
#include "lpmgh/rng.hpp"

namespace lpmgh {

namespace {

// Nearest center per row, ties toward the lower center index. Distances go
// through the gemm expansion |x|^2 + |c|^2 - 2 x.c so the row block is one
// matrix product.
void assign_nearest(const Matrix& x, const Matrix& centers, const Vector& x_sqnorm,
                    std::vector<Eigen::Index>& assignment, Vector* nearest_dist2) {
    const Vector c_sqnorm = centers.rowwise().squaredNorm();
    parallel::parallel_for(x.rows(), [&](std::int64_t begin, std::int64_t end) {
        const Eigen::Index rows = static_cast<Eigen::Index>(end - begin);
        const Matrix cross = x.middleRows(begin, rows) * centers.transpose();
        for (Eigen::Index i = 0; i < rows; ++i) {
            Eigen::Index best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (Eigen::Index p = 0; p < centers.rows(); ++p) {
                const double dist = x_sqnorm[begin + i] + c_sqnorm[p] - 2.0 * cross(i, p);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = p;
                }
            }
            assignment[static_cast<std::size_t>(begin + i)] = best;
            if (nearest_dist2) (*nearest_dist2)[begin + i] = std::max(best_dist, 0.0);
        }
    });
}

Matrix kmeans_pp_init(const Matrix& x, Eigen::Index k, rng::Engine& engine) {
    const Eigen::Index n = x.rows();
    Matrix centers(k, x.cols());
    std::vector<char> taken(static_cast<std::size_t>(n), 0);

    Eigen::Index first = static_cast<Eigen::Index>(rng::below(engine, static_cast<std::uint64_t>(n)));
    centers.row(0) = x.row(first);
    taken[static_cast<std::size_t>(first)] = 1;

    Vector dist2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (Eigen::Index c = 1; c < k; ++c) {
        const double total = dist2.sum();
        Eigen::Index pick = -1;
        if (total > 0.0) {
            const double target = rng::uniform01(engine) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += dist2[i];
                if (acc >= target && !taken[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick < 0) {
            // all remaining mass zero (duplicate points): lowest untaken index
            for (Eigen::Index i = 0; i < n; ++i)
                if (!taken[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
        }
        centers.row(c) = x.row(pick);
        taken[static_cast<std::size_t>(pick)] = 1;
        dist2 = dist2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }
    return centers;
}

} // namespace

AnchorSet select_anchors(const Matrix& x, Eigen::Index anchor_count, std::uint64_t seed,
                         int max_iters, int view_index) {
    const Eigen::Index n = x.rows();
    if (anchor_count < 2 || anchor_count > n)
        throw ConfigError("anchor count must satisfy 2 <= P <= n");

    auto engine = rng::make_engine(seed);
    Matrix centers = kmeans_pp_init(x, anchor_count, engine);

    const Vector x_sqnorm = x.rowwise().squaredNorm();
    std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> previous;
    Vector nearest_dist2(n);

    for (int iter = 0; iter < max_iters; ++iter) {
        assign_nearest(x, centers, x_sqnorm, assignment, &nearest_dist2);
        if (assignment == previous) break;
        previous = assignment;

        Matrix sums = Matrix::Zero(anchor_count, x.cols());
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(anchor_count), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assignment[static_cast<std::size_t>(i)]) += x.row(i);
            ++counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])];
        }
        std::vector<char> reseeded(static_cast<std::size_t>(n), 0);
        for (Eigen::Index p = 0; p < anchor_count; ++p) {
            if (counts[static_cast<std::size_t>(p)] > 0) {
                centers.row(p) = sums.row(p) / static_cast<double>(counts[static_cast<std::size_t>(p)]);
            } else {
                // farthest point from its center, skipping points already used
                Eigen::Index far = 0;
                double far_dist = -1.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (reseeded[static_cast<std::size_t>(i)]) continue;
                    if (nearest_dist2[i] > far_dist) {
                        far_dist = nearest_dist2[i];
                        far = i;
                    }
                }
                centers.row(p) = x.row(far);
                reseeded[static_cast<std::size_t>(far)] = 1;
            }
        }
    }
    return AnchorSet{std::move(centers), view_index};
}

AnchorGraphFactor build_factor(const Matrix& x, const AnchorSet& anchors, int s,
                               std::optional<double> bandwidth) {
    const Eigen::Index n = x.rows();
    const Eigen::Index anchor_count = anchors.count();
    if (x.cols() != anchors.centers.cols()) throw ShapeError("anchor dimension mismatch");
    if (s < 1 || s > anchor_count) throw ConfigError("need 1 <= s <= anchor count");
    if (bandwidth && *bandwidth <= 0.0) throw ConfigError("bandwidth must be positive");

    // s nearest anchors per row, plus the distance to the s-th one for the
    // auto bandwidth rule.
    Matrix nearest_dist2(n, s);
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> nearest_idx(n, s);
    const Vector x_sqnorm = x.rowwise().squaredNorm();
    const Vector c_sqnorm = anchors.centers.rowwise().squaredNorm();
    parallel::parallel_for(n, [&](std::int64_t begin, std::int64_t end) {
        const Eigen::Index rows = static_cast<Eigen::Index>(end - begin);
        const Matrix cross = x.middleRows(begin, rows) * anchors.centers.transpose();
        std::vector<std::pair<double, Eigen::Index>> order(static_cast<std::size_t>(anchor_count));
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index p = 0; p < anchor_count; ++p)
                order[static_cast<std::size_t>(p)] = {
                    std::max(x_sqnorm[begin + i] + c_sqnorm[p] - 2.0 * cross(i, p), 0.0), p};
            std::partial_sort(order.begin(), order.begin() + s, order.end());
            for (int j = 0; j < s; ++j) {
                nearest_dist2(begin + i, j) = order[static_cast<std::size_t>(j)].first;
                nearest_idx(begin + i, j) = order[static_cast<std::size_t>(j)].second;
            }
        }
    });

    double sigma;
    if (bandwidth) {
        sigma = *bandwidth;
    } else {
        sigma = nearest_dist2.col(s - 1).array().sqrt().mean();
        if (sigma <= 0.0)
            throw DegenerateError("auto bandwidth: every point coincides with its anchors");
    }
    const double inv_sigma2 = 1.0 / (sigma * sigma);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(s));
    for (Eigen::Index i = 0; i < n; ++i) {
        // shift by the row minimum before exp so far rows cannot underflow
        const double shift = nearest_dist2.row(i).minCoeff();
        double row_sum = 0.0;
        Eigen::ArrayXd w(s);
        for (int j = 0; j < s; ++j) {
            w[j] = std::exp((shift - nearest_dist2(i, j)) * inv_sigma2);
            row_sum += w[j];
        }
        for (int j = 0; j < s; ++j)
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(nearest_idx(i, j)),
                                  w[j] / row_sum);
    }

    Eigen::SparseMatrix<double, Eigen::RowMajor> z(n, anchor_count);
    z.setFromTriplets(triplets.begin(), triplets.end());

    Vector lambda = Vector::Zero(anchor_count);
    for (const auto& t : triplets) lambda[t.col()] += t.value();

    // drop zero-mass anchors, remapping columns
    std::vector<Eigen::Index> keep;
    for (Eigen::Index p = 0; p < anchor_count; ++p)
        if (lambda[p] > 0.0) keep.push_back(p);
    if (static_cast<Eigen::Index>(keep.size()) < anchor_count) {
        std::vector<Eigen::Index> remap(static_cast<std::size_t>(anchor_count), -1);
        for (std::size_t j = 0; j < keep.size(); ++j) remap[static_cast<std::size_t>(keep[j])] = static_cast<Eigen::Index>(j);
        for (auto& t : triplets)
            t = {t.row(), static_cast<int>(remap[static_cast<std::size_t>(t.col())]), t.value()};
        z.resize(n, static_cast<Eigen::Index>(keep.size()));
        z.setFromTriplets(triplets.begin(), triplets.end());
        Vector kept(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t j = 0; j < keep.size(); ++j) kept[static_cast<Eigen::Index>(j)] = lambda[keep[j]];
        lambda = std::move(kept);
    }

    return AnchorGraphFactor{std::move(z), std::move(lambda), s};
}

ScatterMatrix scatter_matrix(const Matrix& x, const AnchorGraphFactor& f) {
    if (f.z.rows() != x.rows()) throw ShapeError("factor row count does not match data");
    // S = (lambda^-1/2 Z^T X)^T (lambda^-1/2 Z^T X), PSD up to rounding
    Matrix u = f.z.transpose() * x;
    u.array().colwise() *= f.lambda.array().rsqrt();
    ScatterMatrix s = u.transpose() * u;
    return 0.5 * (s + s.transpose());
}

Matrix dense_affinity(const AnchorGraphFactor& f) {
    const Matrix z = Matrix(f.z);
    return z * f.lambda.cwiseInverse().asDiagonal() * z.transpose();
}

} // namespace lpmgh
