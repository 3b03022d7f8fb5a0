#pragma once
// Minimal worker-pool loop for per-item stage parallelism. Items are
// claimed by atomic index so results can be written to pre-sized slots;
// callers own any ordering of the output.

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ptod {

// Runs fn(i) for i in [0, count) on up to `workers` threads.
// workers == 0 means hardware concurrency. The first exception thrown by
// any worker is rethrown after all threads join.
template <typename Fn>
void parallel_for(size_t count, size_t workers, Fn&& fn) {
    if (count == 0) return;
    if (workers == 0) workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min(workers, count);
    if (workers == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto body = [&] {
        while (!stop.load(std::memory_order_relaxed)) {
            size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                stop.store(true, std::memory_order_relaxed);
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ptod
