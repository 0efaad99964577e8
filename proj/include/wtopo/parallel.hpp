#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace wtopo {

// Worker cap: TWS_THREADS env var, else hardware concurrency.
inline int worker_count() {
    int n = 0;
    if (const char* env = std::getenv("TWS_THREADS")) {
        n = std::atoi(env);
    }
    if (n <= 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
    }
    return std::max(1, n);
}

// Partition [begin, end) into contiguous chunks, one per worker. Each index
// is visited exactly once and writes must be disjoint per index, so the
// result is identical for any thread count.
template <typename Fn>
void parallel_for(int begin, int end, Fn&& fn, int grain = 4096) {
    const int count = end - begin;
    if (count <= 0) return;
    int workers = std::min(worker_count(), (count + grain - 1) / grain);
    if (workers <= 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    const int chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = begin + w * chunk;
        const int hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace wtopo
