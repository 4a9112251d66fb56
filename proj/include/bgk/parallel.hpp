#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bgk {

/// Runs `fn(i)` for every i in [0, n) using up to `workers` threads.
///
/// Each index is processed by exactly one thread and `fn` must only write
/// state owned by index i, so results never depend on the worker count.
/// The first exception thrown (lowest index among those observed) is
/// rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    if (n == 0) return;
    const std::size_t nthreads = std::min<std::size_t>(std::max(1u, workers), n);
    if (nthreads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::size_t first_index = n;

    auto body = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (i < first_index) {
                    first_index = i;
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(nthreads - 1);
    const std::size_t chunk = (n + nthreads - 1) / nthreads;
    for (std::size_t t = 1; t < nthreads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(body, begin, end);
    }
    body(0, std::min(n, chunk));
    pool.clear();

    if (first_error) std::rethrow_exception(first_error);
}

} // namespace bgk
