#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace decup {

// Worker count resolution: explicit value, else DECUPSIM_WORKERS, else hardware.
inline int resolve_workers(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DECUPSIM_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(batch_index) for every batch and collects results indexed by batch.
// Work is pulled from an atomic counter, but each result depends only on its
// batch index, so the output is independent of scheduling and worker count.
template <typename Result, typename Fn>
std::vector<Result> run_batches(std::size_t n_batches, int workers, Fn&& fn) {
    std::vector<Result> results(n_batches);
    workers = resolve_workers(workers);
    if (workers <= 1 || n_batches <= 1) {
        for (std::size_t b = 0; b < n_batches; ++b) results[b] = fn(b);
        return results;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_batches) return;
            results[b] = fn(b);
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<std::size_t>(workers, n_batches);
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return results;
}

// contiguous [begin, end) trajectory range of batch b out of n_batches
inline std::pair<std::size_t, std::size_t> batch_range(std::size_t n_items, std::size_t n_batches,
                                                       std::size_t b) {
    const std::size_t lo = n_items * b / n_batches;
    const std::size_t hi = n_items * (b + 1) / n_batches;
    return {lo, hi};
}

}  // namespace decup
