#pragma once

#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace perimts {

// Worker count comes from PERIMTS_WORKERS; falls back to hardware concurrency.
inline int worker_count() {
    static const int n = [] {
        if (const char* env = std::getenv("PERIMTS_WORKERS")) {
            const int v = std::atoi(env);
            if (v >= 1) return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return n;
}

// Static block partition so the work split (and any per-block accumulation
// order) is independent of scheduling. Each index is visited exactly once.
template <class F>
void parallel_for(std::size_t begin, std::size_t end, F&& body, std::size_t grain = 256) {
    const std::size_t n = end > begin ? end - begin : 0;
    const int workers = worker_count();
    if (workers <= 1 || n <= grain) {
        for (std::size_t i = begin; i < end; ++i) body(i);
        return;
    }
    const std::size_t nblocks = std::min<std::size_t>(workers, (n + grain - 1) / grain);
    const std::size_t chunk = (n + nblocks - 1) / nblocks;
    std::vector<std::thread> pool;
    pool.reserve(nblocks);
    for (std::size_t b = 0; b < nblocks; ++b) {
        const std::size_t lo = begin + b * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace perimts
