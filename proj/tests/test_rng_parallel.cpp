#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "lpmgh/parallel.hpp"
#include "lpmgh/rng.hpp"

using namespace lpmgh;

TEST_CASE("uniform01 stays in [0,1) and is reproducible") {
    auto e1 = rng::make_engine(42);
    auto e2 = rng::make_engine(42);
    for (int i = 0; i < 10000; ++i) {
        const double v = rng::uniform01(e1);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        CHECK(v == rng::uniform01(e2));
    }
}

TEST_CASE("below produces every residue and respects the bound") {
    auto e = rng::make_engine(7);
    std::vector<int> seen(13, 0);
    for (int i = 0; i < 5000; ++i) {
        const auto v = rng::below(e, 13);
        REQUIRE(v < 13);
        ++seen[static_cast<std::size_t>(v)];
    }
    for (const int c : seen) CHECK(c > 0);
}

TEST_CASE("gaussian has roughly standard moments") {
    auto e = rng::make_engine(3);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng::gaussian(e);
        sum += g;
        sum2 += g * g;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("gaussian_matrix fills row-major from the engine stream") {
    auto e1 = rng::make_engine(11);
    const Eigen::MatrixXd m = rng::gaussian_matrix(e1, 3, 4);
    auto e2 = rng::make_engine(11);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) CHECK(m(i, j) == rng::gaussian(e2));
}

TEST_CASE("shuffle permutes and is seed-deterministic") {
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    auto e = rng::make_engine(5);
    rng::shuffle(e, v);
    std::vector<int> w(100);
    std::iota(w.begin(), w.end(), 0);
    auto e2 = rng::make_engine(5);
    rng::shuffle(e2, w);
    CHECK(v == w);
    std::sort(v.begin(), v.end());
    std::vector<int> sorted(100);
    std::iota(sorted.begin(), sorted.end(), 0);
    CHECK(v == sorted);
}

TEST_CASE("thread cap override wins over environment and hardware") {
    const int before = parallel::thread_cap();
    CHECK(before >= 1);
    parallel::set_thread_cap(3);
    CHECK(parallel::thread_cap() == 3);
    parallel::set_thread_cap(0); // back to automatic
    CHECK(parallel::thread_cap() >= 1);
}

TEST_CASE("parallel_for covers the range exactly once regardless of cap") {
    for (const int cap : {1, 2, 7}) {
        parallel::set_thread_cap(cap);
        std::vector<int> hits(1000, 0);
        parallel::parallel_for(1000, [&](std::int64_t b, std::int64_t end) {
            for (std::int64_t i = b; i < end; ++i) ++hits[static_cast<std::size_t>(i)];
        });
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
    parallel::set_thread_cap(0);
}

TEST_CASE("parallel_for reductions in index order match serial results") {
    std::vector<double> out(512);
    parallel::set_thread_cap(1);
    parallel::parallel_for(512, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) out[static_cast<std::size_t>(i)] = std::sqrt(double(i));
    });
    std::vector<double> out4(512);
    parallel::set_thread_cap(4);
    parallel::parallel_for(512, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) out4[static_cast<std::size_t>(i)] = std::sqrt(double(i));
    });
    parallel::set_thread_cap(0);
    CHECK(out == out4);
}
