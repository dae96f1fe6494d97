#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace advsnell {

/// Number of worker threads used by layer sweeps. Zero means hardware concurrency.
struct Parallelism {
    unsigned threads = 1;

    unsigned resolved() const {
        if (threads != 0) return threads;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

/// Runs body(i) for i in [0, count) over contiguous chunks. Each index is
/// visited exactly once, so any body that only writes slot i gives results
/// independent of the thread count.
template <class Body>
void parallel_for(std::size_t count, Parallelism par, Body&& body, std::size_t min_chunk = 2048) {
    const unsigned workers = static_cast<unsigned>(
        std::min<std::size_t>(par.resolved(), (count + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

} // namespace advsnell
