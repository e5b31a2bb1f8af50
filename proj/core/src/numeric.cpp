#include "qpsl/numeric.hpp"

#include <atomic>
#include <thread>

namespace qpsl::num {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n); }

int thread_count() { return g_threads.load(); }

void parallel_for_index(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int nt = std::min<int>(thread_count(), static_cast<int>(n));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& w : workers) w.join();
}

} // namespace qpsl::num
