#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace rootsr::fft {

/// In-place complex FFT of any length n >= 1. Radix-2 Cooley-Tukey for
/// powers of two, Bluestein's chirp-z transform otherwise. The inverse
/// includes the 1/n scaling.
void transform(std::complex<double>* data, std::size_t n, bool inverse);

/// Row-major 2D transform (rows then columns); inverse includes 1/(h*w).
void transform_2d(std::complex<double>* data, int h, int w, bool inverse);

std::size_t next_pow2(std::size_t n);

}  // namespace rootsr::fft
