#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace wellspec {

// Runs fn(0..count-1) on up to n_jobs threads. Tasks own their output slots
// and derive their own RNG streams, so results cannot depend on scheduling;
// the first exception (by task index) is rethrown after all workers join.
inline void parallel_for(std::size_t n_jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    n_jobs = std::min(n_jobs, hw);  // extra workers only add contention
    if (n_jobs <= 1 || count == 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    const std::size_t workers = std::min(n_jobs, count);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= count) return;
                try {
                    fn(k);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace wellspec
