#include "fredholm/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace fredholm {

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    workers = std::clamp<std::size_t>(workers, 1, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, w, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

double pairwise_sum_strided(const double* values, std::size_t count, std::size_t stride) {
    constexpr std::size_t kBlock = 8;
    if (count <= kBlock) {
        double s = 0.0;
        for (std::size_t i = 0; i < count; ++i) s += values[i * stride];
        return s;
    }
    const std::size_t half = count / 2;
    return pairwise_sum_strided(values, half, stride) +
           pairwise_sum_strided(values + half * stride, count - half, stride);
}

double pairwise_sum(std::span<const double> values) {
    return pairwise_sum_strided(values.data(), values.size(), 1);
}

}  // namespace fredholm
