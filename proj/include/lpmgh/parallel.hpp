#ifndef LPMGH_PARALLEL_HPP
#define LPMGH_PARALLEL_HPP

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace lpmgh::parallel {

// Worker cap. Resolution order: set_thread_cap() > LPMGH_THREADS > hardware.
int thread_cap();
void set_thread_cap(int cap);

// Runs fn(begin, end) over a partition of [0, n). Workers own disjoint
// ranges and must only write to disjoint state; any reduction happens in
// the caller afterwards, in index order. The partition is cut into
// fixed-extent blocks — never by thread count — so blocked kernels inside
// fn (e.g. a per-range gemm) see identical operand shapes and round
// identically no matter how many workers run.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
    if (n <= 0) return;
    constexpr std::int64_t kBlock = 256;
    const std::int64_t blocks = (n + kBlock - 1) / kBlock;
    const auto run_block = [&fn, n](std::int64_t b) {
        fn(b * kBlock, std::min(n, (b + 1) * kBlock));
    };
    const std::int64_t workers = std::min<std::int64_t>(thread_cap(), blocks);
    if (workers <= 1) {
        for (std::int64_t b = 0; b < blocks; ++b) run_block(b);
        return;
    }
    std::atomic<std::int64_t> next{0};
    const auto worker = [&] {
        for (std::int64_t b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) run_block(b);
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (std::int64_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

} // namespace lpmgh::parallel

#endif
