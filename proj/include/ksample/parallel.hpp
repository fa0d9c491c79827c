#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ksample {

/// Environment variable holding the worker thread count.
inline constexpr const char* kThreadsEnv = "KSAMPLE_THREADS";

inline std::size_t thread_count() {
    if (const char* env = std::getenv(kThreadsEnv)) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            // fall through to the hardware default
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// splitmix64 finalizer; derives independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a) noexcept {
    return mix64(mix64(master) ^ mix64(a + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) noexcept {
    return derive_seed(derive_seed(master, a), b);
}

namespace detail {
inline thread_local bool in_worker = false;
}

/// Calls f(i) for i in [0, n). Work is spread over thread_count() threads;
/// nested calls from inside a worker run serially. The first exception thrown
/// by any task is rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const std::size_t threads = std::min(thread_count(), n);
    if (threads <= 1 || detail::in_worker) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        detail::in_worker = true;
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                f(i);
            } catch (...) {
                const std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
        detail::in_worker = false;
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads - 1);
        for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace ksample
