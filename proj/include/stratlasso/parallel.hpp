#pragma once
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace stratlasso {

/// Thread count from STRATLASSO_THREADS, falling back to 1.
inline int default_thread_count()
{
    if (const char* env = std::getenv("STRATLASSO_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (...) {
        }
    }
    return 1;
}

/**
 * Runs f(i) for i in [0, count) on up to `threads` workers. Tasks write into
 * caller-owned slots indexed by i, so completion order never affects output.
 * The first exception thrown by any task is rethrown after all workers join.
 */
template <class F>
void parallel_for(long count, int threads, F&& f)
{
    if (count <= 0) return;
    if (threads <= 1 || count == 1) {
        for (long i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const long nworkers = std::min<long>(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nworkers));
    for (long t = 0; t < nworkers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace stratlasso
