#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace nwsr {

// Process-wide cap on worker threads (settable from the CLI --threads flag).
inline int& thread_cap() {
    static int cap = static_cast<int>(std::thread::hardware_concurrency());
    return cap;
}

// Run fn(i) for i in [begin, end) on up to thread_cap() threads. Work is
// split into contiguous chunks so results never depend on scheduling; callers
// must only write to disjoint state per index.
template <typename Fn>
void parallel_for(std::int64_t begin, std::int64_t end, Fn&& fn) {
    const std::int64_t n = end - begin;
    if (n <= 0) return;
    const int threads =
        static_cast<int>(std::max<std::int64_t>(1, std::min<std::int64_t>(thread_cap(), n)));
    if (threads == 1) {
        for (std::int64_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const std::int64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::int64_t lo = begin + t * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::int64_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                if (!failed.exchange(true)) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace nwsr
