#ifndef LPMGH_RNG_HPP
#define LPMGH_RNG_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace lpmgh::rng {

// mt19937_64 has a standardized output sequence, but the standard
// distributions do not, so every draw below is hand-rolled on top of the
// raw engine output. Identical seeds give identical streams everywhere.
using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine{seed}; }

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& e) {
    return static_cast<double>(e() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n), unbiased via rejection.
inline std::uint64_t below(Engine& e, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = e();
    while (v >= limit) v = e();
    return v % n;
}

// Standard normal via Box-Muller; consumes two engine words per value.
inline double gaussian(Engine& e) {
    const double u1 = 1.0 - uniform01(e); // (0, 1], keeps log finite
    const double u2 = uniform01(e);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Row-major fill so the stream layout is independent of Eigen's storage order.
inline Eigen::MatrixXd gaussian_matrix(Engine& e, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = gaussian(e);
    return m;
}

// In-place Fisher-Yates.
template <typename T>
void shuffle(Engine& e, std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(below(e, i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace lpmgh::rng

#endif
