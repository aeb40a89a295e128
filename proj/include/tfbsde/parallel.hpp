#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace tfbsde {

/// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries do
/// not depend on the thread count, and chunks only write disjoint state, so
/// results are identical for any n_threads.
inline void parallel_chunks(std::size_t n, int n_threads,
                            const std::function<void(std::size_t, std::size_t)>& fn,
                            std::size_t chunk = 4096) {
    if (n == 0) return;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    if (n_threads <= 1 || n_chunks == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    std::vector<std::thread> pool;
    const int nt = std::min<int>(n_threads, static_cast<int>(n_chunks));
    pool.reserve(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

} // namespace tfbsde
