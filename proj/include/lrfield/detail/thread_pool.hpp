#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "lrfield/errors.hpp"

namespace lrf::detail {

// Runs task(0..n_tasks-1) on n_workers threads. Tasks must write only to
// their own output slots; completion order is reported through on_done but
// results may not depend on it. The first thrown exception is rethrown on
// the calling thread after all workers finish.
inline void run_task_grid(int n_tasks, int n_workers, const std::function<void(int)>& task,
                          const std::function<void(int)>& on_done = {}) {
    if (n_tasks < 0) throw config_error("run_task_grid: negative task count");
    if (n_tasks == 0) return;
    if (n_workers < 1) n_workers = 1;
    if (n_workers > n_tasks) n_workers = n_tasks;

    if (n_workers == 1) {
        for (int i = 0; i < n_tasks; ++i) {
            task(i);
            if (on_done) on_done(i);
        }
        return;
    }

    std::atomic<int> next{0};
    std::mutex report_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n_tasks) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(report_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
            if (on_done) {
                std::lock_guard<std::mutex> lock(report_mutex);
                on_done(i);
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace lrf::detail
