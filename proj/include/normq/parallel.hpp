// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace normq {

/// Worker cap: min(NORMQ_THREADS, hardware concurrency, jobs). NORMQ_THREADS
/// unset or 0 means "use all cores".
inline std::size_t worker_count(std::size_t jobs) {
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("NORMQ_THREADS")) {
        const long cap = std::atol(env);
        if (cap > 0 && static_cast<std::size_t>(cap) < hw) hw = static_cast<std::size_t>(cap);
    }
    return jobs < hw ? (jobs == 0 ? 1 : jobs) : hw;
}

/// Run fn(0) .. fn(count-1) across worker threads. Each index is executed by
/// exactly one worker; callers that need deterministic results write into a
/// per-index slot and reduce in index order afterwards, so the outcome does
/// not depend on the number of workers.
inline void parallel_blocks(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = worker_count(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace normq
