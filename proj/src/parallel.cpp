#include "lpmgh/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace lpmgh::parallel {

namespace {

std::atomic<int> g_cap{0};

int default_cap() {
    if (const char* env = std::getenv("LPMGH_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace

int thread_cap() {
    const int cap = g_cap.load(std::memory_order_relaxed);
    return cap >= 1 ? cap : default_cap();
}

void set_thread_cap(int cap) { g_cap.store(cap, std::memory_order_relaxed); }

} // namespace lpmgh::parallel
