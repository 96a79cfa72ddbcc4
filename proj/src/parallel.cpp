#include "sardine/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace sardine {

namespace {

int env_or_hardware_threads() {
    if (const char* env = std::getenv("SARDINE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& configured() {
    static std::atomic<int> n{env_or_hardware_threads()};
    return n;
}

} // namespace

int thread_count() { return configured().load(std::memory_order_relaxed); }

void set_thread_count(int n) {
    configured().store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

} // namespace sardine
