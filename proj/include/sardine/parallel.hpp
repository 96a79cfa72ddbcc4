#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sardine {

// Worker count used by the compute kernels. Resolution order:
// set_thread_count() (CLI --threads / --deterministic), else the
// SARDINE_THREADS environment variable, else hardware concurrency.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, count), statically chunked across threads.
// Every index is owned by exactly one invocation and each output element
// must be written by exactly one index, so results are identical for any
// thread count; parallelism never reassociates a sum.
template <typename F>
void parallel_for(std::int64_t count, F&& fn) {
    const int threads = thread_count();
    if (threads <= 1 || count <= 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run_chunk = [&](int worker) {
        const std::int64_t lo = count * worker / workers;
        const std::int64_t hi = count * (worker + 1) / workers;
        try {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    for (int t = 1; t < workers; ++t) pool.emplace_back(run_chunk, t);
    run_chunk(0);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace sardine
