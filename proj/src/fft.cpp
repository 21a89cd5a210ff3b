#include "rootsr/fft.hpp"

#include <cmath>
#include <cstdint>

namespace rootsr::fft {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2, bit-reversal permutation then butterflies.
void radix2(std::complex<double>* a, std::size_t n, bool inverse) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const std::complex<double> wstep(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wstep;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) a[i] *= inv;
    }
}

// Bluestein: express the length-n DFT as a circular convolution of size
// m = next_pow2(2n - 1). Chirp exponents are reduced mod 2n to keep the
// angle argument small.
void bluestein(std::complex<double>* a, std::size_t n) {
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<std::complex<double>> chirp(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::uint64_t sq = (static_cast<std::uint64_t>(j) * j) % (2 * n);
        const double ang = -kPi * static_cast<double>(sq) / static_cast<double>(n);
        chirp[j] = {std::cos(ang), std::sin(ang)};
    }
    std::vector<std::complex<double>> fa(m), fb(m);
    for (std::size_t j = 0; j < n; ++j) fa[j] = a[j] * chirp[j];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t j = 1; j < n; ++j) fb[j] = fb[m - j] = std::conj(chirp[j]);
    radix2(fa.data(), m, false);
    radix2(fb.data(), m, false);
    for (std::size_t j = 0; j < m; ++j) fa[j] *= fb[j];
    radix2(fa.data(), m, true);
    for (std::size_t j = 0; j < n; ++j) a[j] = fa[j] * chirp[j];
}

}  // namespace

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void transform(std::complex<double>* data, std::size_t n, bool inverse) {
    if (n <= 1) return;
    if (is_pow2(n)) {
        radix2(data, n, inverse);
        return;
    }
    if (!inverse) {
        bluestein(data, n);
        return;
    }
    // inverse via conj(FFT(conj(x))) / n
    for (std::size_t i = 0; i < n; ++i) data[i] = std::conj(data[i]);
    bluestein(data, n);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = std::conj(data[i]) * inv;
}

void transform_2d(std::complex<double>* data, int h, int w, bool inverse) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        transform(data + static_cast<std::size_t>(y) * w, static_cast<std::size_t>(w), inverse);
#pragma omp parallel for schedule(static)
    for (int x = 0; x < w; ++x) {
        std::vector<std::complex<double>> col(static_cast<std::size_t>(h));
        for (int y = 0; y < h; ++y) col[y] = data[static_cast<std::size_t>(y) * w + x];
        transform(col.data(), static_cast<std::size_t>(h), inverse);
        for (int y = 0; y < h; ++y) data[static_cast<std::size_t>(y) * w + x] = col[y];
    }
}

}  // namespace rootsr::fft
