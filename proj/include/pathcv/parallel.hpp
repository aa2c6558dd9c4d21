#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pathcv {

/**
 * Runs fn(i) for i in [0, count) on up to `threads` workers. Work items are
 * handed out dynamically, so fn must write only to slot i of its outputs;
 * callers reduce in index order afterwards. If items throw, every item
 * still runs and the exception from the lowest failing index is rethrown on
 * the calling thread, so error reporting does not depend on timing.
 */
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn)
{
    if (count <= 0) return;
    const int workers = std::clamp(threads, 1, count);
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    int error_index = count;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (i < error_index) {
                    error = std::current_exception();
                    error_index = i;
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace pathcv
