#ifndef LPMGH_TEST_HELPERS_HPP
#define LPMGH_TEST_HELPERS_HPP

#include <Eigen/Dense>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "lpmgh/rng.hpp"
#include "lpmgh/stiefel.hpp"

namespace testutil {

// Self-cleaning scratch directory under the system temp root.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        const std::string name = "lpmgh_test_" + std::to_string(::getpid()) + "_" +
                                 std::to_string(counter.fetch_add(1));
        path = std::filesystem::temp_directory_path() / name;
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& leaf) const { return path / leaf; }
};

inline Eigen::MatrixXd random_orthonormal(lpmgh::rng::Engine& e, Eigen::Index d, Eigen::Index r) {
    return lpmgh::orthonormalize(lpmgh::rng::gaussian_matrix(e, d, r));
}

inline Eigen::MatrixXd random_psd(lpmgh::rng::Engine& e, Eigen::Index d) {
    const Eigen::MatrixXd a = lpmgh::rng::gaussian_matrix(e, d, d);
    return a * a.transpose();
}

// Random sign matrix with entries exactly +-1.
inline Eigen::MatrixXd random_signs(lpmgh::rng::Engine& e, Eigen::Index n, Eigen::Index r) {
    Eigen::MatrixXd b(n, r);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < r; ++j) b(i, j) = lpmgh::rng::uniform01(e) < 0.5 ? -1.0 : 1.0;
    return b;
}

} // namespace testutil

#endif
