#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pllsim::detail {

[[nodiscard]] inline std::size_t resolve_workers(std::size_t requested) {
    if (requested == 0) {
        return std::max<std::size_t>(1, std::thread::hardware_concurrency());
    }
    return requested;
}

/// Calls fn(i) for i in [0, count) on up to `workers` threads. Indices are handed
/// out dynamically; callers write results by index. The first exception stops
/// further work and is rethrown after all threads have joined.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::min(resolve_workers(workers), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        while (!stop.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                stop = true;
            }
        }
    };
    {
        std::vector<std::jthread> threads;
        threads.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) {
            threads.emplace_back(body);
        }
        body();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace pllsim::detail
