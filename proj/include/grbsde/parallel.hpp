#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace grbsde {

/// Runs body(begin, end) over contiguous blocks of [0, n). Blocks are
/// disjoint, so results are identical for every thread count as long as
/// body writes only to its own range.
template <typename Body>
void parallel_for_blocks(std::size_t n, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
}

}  // namespace grbsde
