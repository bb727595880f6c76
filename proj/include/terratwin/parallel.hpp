#pragma once
// Deterministic data parallelism: contiguous index chunks across a fixed
// worker count. Callers must write disjoint outputs per index; reductions
// happen afterwards in index order, so results never depend on scheduling.

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace terratwin {

// Worker cap from TERRAIN_TWIN_THREADS (0 or unset = hardware concurrency).
// Read fresh on every call so the cap can change within a process.
inline int worker_count() {
    int n = 0;
    if (const char* env = std::getenv("TERRAIN_TWIN_THREADS"))
        n = std::atoi(env);
    if (n <= 0)
        n = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

template <class Fn>
void parallel_for(int n, Fn&& fn) {
    if (n <= 0)
        return;
    const int workers = std::min(worker_count(), n);
    if (workers == 1) {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        const int lo = static_cast<int>(static_cast<long long>(n) * t / workers);
        const int hi = static_cast<int>(static_cast<long long>(n) * (t + 1) / workers);
        pool.emplace_back([&, lo, hi] {
            try {
                for (int i = lo; i < hi; ++i)
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace terratwin
