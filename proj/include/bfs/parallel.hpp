#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bfs {

// Splits [0, total) into fixed-size blocks and lets `workers` threads pull
// blocks from an atomic counter. The block grid depends only on `total` and
// `block_size`, never on the worker count, so any computation that writes
// disjoint per-index outputs is bitwise identical for every worker count.
//
// fn(begin, end) is called once per block.
template <typename Fn>
void parallel_for_blocks(std::size_t total, int workers, std::size_t block_size, Fn&& fn) {
    if (total == 0) return;
    if (block_size == 0) block_size = 1;
    const std::size_t n_blocks = (total + block_size - 1) / block_size;

    if (workers <= 1 || n_blocks == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t begin = b * block_size;
            fn(begin, std::min(begin + block_size, total));
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1, std::memory_order_relaxed);
            if (b >= n_blocks) return;
            const std::size_t begin = b * block_size;
            try {
                fn(begin, std::min(begin + block_size, total));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    const int n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n_blocks);
    threads.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    if (first_error) std::rethrow_exception(first_error);
}

// Convenience wrapper for elementwise work (disjoint per-index outputs, no
// cross-index reduction), where block granularity affects scheduling only.
template <typename Fn>
void parallel_for(std::size_t total, int workers, Fn&& fn) {
    const std::size_t per_worker = total / static_cast<std::size_t>(std::max(workers, 1) * 4);
    const std::size_t block = std::clamp<std::size_t>(per_worker, 1, 64);
    parallel_for_blocks(total, workers, block, std::forward<Fn>(fn));
}

} // namespace bfs
