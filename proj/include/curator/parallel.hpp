#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace curator {

// Runs fn(i) for i in [0, n) across the given number of workers, in
// contiguous index chunks. fn must be safe to call concurrently for distinct
// indices; results keyed by index stay deterministic regardless of workers.
// The first exception thrown by any worker is rethrown on the caller.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const auto worker_count = static_cast<std::size_t>(workers < 1 ? 1 : workers);
    if (worker_count <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunks = std::min(worker_count, n);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        threads.emplace_back([&, c] {
            try {
                const std::size_t begin = n * c / chunks;
                const std::size_t end = n * (c + 1) / chunks;
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace curator
