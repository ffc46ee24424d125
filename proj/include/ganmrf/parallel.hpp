#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace ganmrf {

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Static contiguous partition of [0, n). Each index is processed exactly once
// and writes only its own output slot, so results do not depend on the thread
// count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned n_threads, Fn&& fn) {
    n_threads = resolve_threads(n_threads);
    if (n_threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(n_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = n * w / workers;
        const std::size_t hi = n * (w + 1) / workers;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace ganmrf
