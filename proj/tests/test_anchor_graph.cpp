#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <vector>

#include "lpmgh/anchor_graph.hpp"
#include "lpmgh/error.hpp"
#include "lpmgh/parallel.hpp"
#include "lpmgh/rng.hpp"
#include "test_helpers.hpp"

using namespace lpmgh;

namespace {

Matrix sorted_rows(Matrix m) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (m(a, j) != m(b, j)) return m(a, j) < m(b, j);
        return false;
    });
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(order[static_cast<std::size_t>(i)]);
    return out;
}

} // namespace

TEST_CASE("two-anchor hand instance: Z, lambda and the materialized affinity") {
    Matrix x(3, 2);
    x << 0, 0, 2, 0, 0, 1;
    Matrix centers(2, 2);
    centers << 0, 0, 2, 0;
    const auto f = build_factor(x, AnchorSet{centers, 0}, 1);

    REQUIRE(f.z.rows() == 3);
    REQUIRE(f.z.cols() == 2);
    const Matrix z = Matrix(f.z);
    Matrix z_expected(3, 2);
    z_expected << 1, 0, 0, 1, 1, 0;
    CHECK((z - z_expected).cwiseAbs().maxCoeff() <= 1e-15);

    REQUIRE(f.lambda.size() == 2);
    CHECK(f.lambda(0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(f.lambda(1) == doctest::Approx(1.0).epsilon(1e-15));

    const Matrix a = dense_affinity(f);
    Matrix a_expected(3, 3);
    a_expected << 0.5, 0, 0.5, 0, 1, 0, 0.5, 0, 0.5;
    CHECK((a - a_expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("scatter through the factor matches the hand computation") {
    Matrix x(3, 2);
    x << 0, 0, 2, 0, 0, 1;
    Matrix centers(2, 2);
    centers << 0, 0, 2, 0;
    const auto f = build_factor(x, AnchorSet{centers, 0}, 1);

    Matrix signal(3, 1);
    signal << 1, -1, 1;
    const ScatterMatrix s = scatter_matrix(signal, f);
    REQUIRE(s.rows() == 1);
    CHECK(s(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("equidistant anchors break toward the lower index") {
    Matrix x(1, 2);
    x << 0, 0;
    Matrix centers(2, 2);
    centers << 1, 0, -1, 0;
    const auto f = build_factor(x, AnchorSet{centers, 0}, 1);
    const Matrix z = Matrix(f.z);
    CHECK(z(0, 0) == 1.0);
    CHECK(z(0, 1) == 0.0);
}

TEST_CASE("anchors nobody selects are dropped so lambda stays positive") {
    Matrix x(3, 2);
    x << 0, 0, 0.1, 0, 0, 0.1;
    Matrix centers(2, 2);
    centers << 0, 0, 100, 100;
    const auto f = build_factor(x, AnchorSet{centers, 0}, 1);
    CHECK(f.z.cols() == 1);
    REQUIRE(f.lambda.size() == 1);
    CHECK(f.lambda(0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK((f.lambda.array() > 0.0).all());

    const Matrix a = dense_affinity(f);
    CHECK((a.array() - 1.0 / 3.0).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("factor arguments are validated") {
    auto e = rng::make_engine(1);
    const Matrix x = rng::gaussian_matrix(e, 12, 3);
    const auto anchors = select_anchors(x, 4, 0);
    CHECK_THROWS_AS(build_factor(x, anchors, 0), ConfigError);
    CHECK_THROWS_AS(build_factor(x, anchors, 5), ConfigError);
    CHECK_THROWS_AS(build_factor(x, anchors, 2, -1.0), ConfigError);
    CHECK_THROWS_AS(build_factor(rng::gaussian_matrix(e, 12, 4), anchors, 2), ShapeError);

    // every point coincides with its nearest anchor: no auto bandwidth exists
    Matrix two(2, 2);
    two << 0, 0, 1, 1;
    CHECK_THROWS_AS(build_factor(two, AnchorSet{two, 0}, 1), DegenerateError);
    CHECK_NOTHROW(build_factor(two, AnchorSet{two, 0}, 1, 0.5));
}

TEST_CASE("row-normalized Z gives A with unit row sums, symmetry and PSD scatter") {
    auto e = rng::make_engine(17);
    for (int trial = 0; trial < 4; ++trial) {
        const Eigen::Index n = 30 + 5 * trial;
        const Matrix x = rng::gaussian_matrix(e, n, 5);
        const auto anchors = select_anchors(x, 8, static_cast<std::uint64_t>(trial));
        const auto f = build_factor(x, anchors, 3);

        // rows of Z sum to one with at most s nonzeros
        const Matrix z = Matrix(f.z);
        for (Eigen::Index i = 0; i < n; ++i) {
            CHECK(std::abs(z.row(i).sum() - 1.0) <= 1e-12);
            CHECK((z.row(i).array() != 0.0).count() <= 3);
        }
        // lambda holds the column masses
        CHECK((f.lambda.transpose() - z.colwise().sum()).cwiseAbs().maxCoeff() <= 1e-12);

        const Matrix a = dense_affinity(f);
        CHECK((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(((a * Vector::Ones(n)).array() - 1.0).abs().maxCoeff() <= 1e-10);

        // spectrum of L = I - A sits in [0, 1] up to rounding
        Eigen::SelfAdjointEigenSolver<Matrix> eig(Matrix::Identity(n, n) - a);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
        CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-10);
    }
}

TEST_CASE("factored scatter equals the dense X^T A X within 1e-8 relative") {
    auto e = rng::make_engine(23);
    for (int trial = 0; trial < 6; ++trial) {
        const Eigen::Index n = 20 + 5 * trial; // n <= 50
        const Eigen::Index d = 4 + trial % 3;
        const Matrix x = rng::gaussian_matrix(e, n, d);
        const auto anchors = select_anchors(x, 6, static_cast<std::uint64_t>(trial) + 100);
        const auto f = build_factor(x, anchors, 2);

        const ScatterMatrix s = scatter_matrix(x, f);
        const Matrix dense = x.transpose() * dense_affinity(f) * x;
        CHECK((s - dense).norm() <= 1e-8 * std::max(1.0, dense.norm()));
        CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-12);

        // PSD within roundoff against 100 random probes
        for (int probe = 0; probe < 100; ++probe) {
            const Vector v = rng::gaussian_matrix(e, d, 1);
            CHECK(v.dot(s * v) >= -1e-8 * s.norm() * v.squaredNorm());
        }
    }
}

TEST_CASE("k-means anchors are deterministic per seed") {
    auto e = rng::make_engine(31);
    const Matrix x = rng::gaussian_matrix(e, 60, 4);
    const auto a1 = select_anchors(x, 10, 5);
    const auto a2 = select_anchors(x, 10, 5);
    CHECK(a1.centers == a2.centers);
    const auto a3 = select_anchors(x, 10, 6);
    CHECK(a1.centers != a3.centers);
}

TEST_CASE("requesting one anchor per point returns the points themselves") {
    auto e = rng::make_engine(37);
    const Matrix x = rng::gaussian_matrix(e, 15, 3);
    const auto anchors = select_anchors(x, 15, 2);
    CHECK((sorted_rows(anchors.centers) - sorted_rows(x)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("anchor count bounds are enforced") {
    auto e = rng::make_engine(41);
    const Matrix x = rng::gaussian_matrix(e, 10, 2);
    CHECK_THROWS_AS(select_anchors(x, 1, 0), ConfigError);
    CHECK_THROWS_AS(select_anchors(x, 11, 0), ConfigError);
}

TEST_CASE("factor construction does not depend on the thread count") {
    auto e = rng::make_engine(43);
    const Matrix x = rng::gaussian_matrix(e, 80, 6);
    const auto anchors = select_anchors(x, 12, 9);

    parallel::set_thread_cap(1);
    const auto f1 = build_factor(x, anchors, 3);
    const ScatterMatrix s1 = scatter_matrix(x, f1);
    parallel::set_thread_cap(4);
    const auto f4 = build_factor(x, anchors, 3);
    const ScatterMatrix s4 = scatter_matrix(x, f4);
    parallel::set_thread_cap(0);

    CHECK(Matrix(f1.z) == Matrix(f4.z));
    CHECK(s1 == s4);
}
