#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nova {

// Runs fn(chunk) for chunk in [0, chunks) on up to `workers` threads.
//
// Work is partitioned into chunks whose boundaries never depend on the worker
// count, and every chunk writes only to its own output slot, so results are
// identical for any number of workers. Callers that need a reduction merge the
// per-chunk slots afterwards in ascending chunk order.
template <class Fn>
void parallel_chunks(std::size_t chunks, unsigned workers, Fn&& fn) {
    if (chunks == 0) {
        return;
    }
    const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(chunks)));
    if (threads == 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            fn(c);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) {
                return;
            }
            try {
                fn(c);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t) {
        pool.emplace_back(run);
    }
    run();
    for (auto& thread : pool) {
        thread.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

inline unsigned default_workers() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

}  // namespace nova
