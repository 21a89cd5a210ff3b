#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rootsr {

// Deterministic parallel reduction: the range is split into fixed-size blocks
// (a function of n only, never of the thread count), each block is summed
// serially, and the block partials are combined in index order. The result is
// bit-identical across runs and across OMP_NUM_THREADS settings, though it may
// differ from a single serial left-to-right sum in the last few ulps.
double parallel_sum(const double* data, std::size_t n);

/// Sum of f(i) for i in [0, n), same fixed-block scheme as parallel_sum.
template <typename F>
double parallel_sum_indexed(std::size_t n, F&& f);

std::size_t sum_block_size(std::size_t n);

template <typename F>
double parallel_sum_indexed(std::size_t n, F&& f) {
    if (n == 0) return 0.0;
    const std::size_t block = sum_block_size(n);
    const std::size_t nblocks = (n + block - 1) / block;
    std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(nblocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * block;
        const std::size_t hi = lo + block < n ? lo + block : n;
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += f(i);
        partial[static_cast<std::size_t>(b)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace rootsr
