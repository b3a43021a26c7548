#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace fieldpipe::detail {

/// Runs fn(begin, end) over contiguous chunks of [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_chunks(int n, int jobs, Fn&& fn) {
    jobs = std::clamp(jobs, 1, std::max(1, n));
    if (jobs == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    {
        std::vector<std::jthread> workers;
        const int chunk = (n + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            const int begin = j * chunk;
            const int end = std::min(n, begin + chunk);
            if (begin >= end) break;
            workers.emplace_back([&, j, begin, end] {
                try {
                    fn(begin, end);
                } catch (...) {
                    errors[static_cast<std::size_t>(j)] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace fieldpipe::detail
