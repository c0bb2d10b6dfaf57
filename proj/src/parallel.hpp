#pragma once

// Fixed-block work scheduler. Items are grouped into constant-size blocks by
// index; workers claim whole blocks. Callers that sum per-block accumulators
// in block order get results independent of the worker count, because the
// grouping never depends on scheduling.

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "pptv/error.hpp"

namespace pptv {

constexpr std::size_t kParallelBlock = 64;

inline std::size_t block_count(std::size_t n_items) {
    return (n_items + kParallelBlock - 1) / kParallelBlock;
}

// fn(block_index, begin, end) must touch only state owned by its block.
template <class Fn>
void run_blocks(std::size_t n_items, int workers, Fn fn) {
    if (workers < 1) throw ConfigError("worker count must be at least 1");
    const std::size_t n_blocks = block_count(n_items);
    if (n_blocks == 0) return;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto drain = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            const std::size_t begin = b * kParallelBlock;
            const std::size_t end = std::min(begin + kParallelBlock, n_items);
            try {
                fn(b, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    if (workers == 1 || n_blocks == 1) {
        drain();
    } else {
        std::vector<std::thread> pool;
        const int n_threads = static_cast<int>(std::min<std::size_t>(workers, n_blocks));
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(drain);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace pptv
