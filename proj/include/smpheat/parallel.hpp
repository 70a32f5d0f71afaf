#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace smpheat {

namespace detail {
inline std::size_t& thread_setting() {
    static std::size_t threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return threads;
}
}  // namespace detail

inline void set_thread_count(std::size_t threads) { detail::thread_setting() = std::max<std::size_t>(1, threads); }
inline std::size_t thread_count() { return detail::thread_setting(); }

/// Work is split into fixed-size chunks independent of the thread count, so any
/// per-chunk state (and the choice of which exception is rethrown) does not
/// depend on scheduling. The body is called as body(begin, end).
inline constexpr std::size_t kChunk = 64;

template <class Body>
void parallel_chunks(std::size_t n, Body&& body) {
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    if (chunks == 0) return;
    std::vector<std::exception_ptr> errors(chunks);
    auto run_chunk = [&](std::size_t c) {
        try {
            body(c * kChunk, std::min(n, (c + 1) * kChunk));
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    const std::size_t workers = std::min(thread_count(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t c = next++; c < chunks; c = next++) run_chunk(c);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    parallel_chunks(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) body(i);
    });
}

}  // namespace smpheat
