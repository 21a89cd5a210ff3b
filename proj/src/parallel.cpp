#include "rootsr/parallel.hpp"

namespace rootsr {

std::size_t sum_block_size(std::size_t n) {
    // Cap the block count so tiny inputs stay serial and huge ones do not
    // allocate unbounded partial arrays.
    if (n <= 4096) return n;
    const std::size_t nblocks = (n + 4095) / 4096 < 1024 ? (n + 4095) / 4096 : 1024;
    return (n + nblocks - 1) / nblocks;
}

double parallel_sum(const double* data, std::size_t n) {
    return parallel_sum_indexed(n, [data](std::size_t i) { return data[i]; });
}

}  // namespace rootsr
