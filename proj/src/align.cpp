#include "rootsr/align.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "rootsr/fft.hpp"

namespace rootsr {

namespace {

// Sinc (spectral zero-padding) 2x upsampling. An interpolating filter such
// as bilinear leaves attenuated alias images in the upper half-band; the
// phase-only normalization then grants those bins full unit weight and they
// vote systematically against odd fine-grid lags, i.e. against exactly the
// half-pixel shifts this module exists to measure. Zero-padding leaves the
// alias band identically zero, so it falls under the epsilon floor instead.
ImageBuffer upsample2x_spectral(const ImageBuffer& m) {
    const int h = m.height, w = m.width;
    const int hh = 2 * h, ww = 2 * w;
    std::vector<std::complex<double>> f(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = m.data[i];
    fft::transform_2d(f.data(), h, w, false);

    // signed frequency -> (destination bins, weight); Nyquist splits in half
    const auto spread = [](int k, int n, int dest_n) {
        std::vector<std::pair<int, double>> out;
        const int signed_f = k <= n / 2 ? k : k - n;
        if (n % 2 == 0 && k == n / 2) {
            out.push_back({n / 2, 0.5});
            out.push_back({dest_n - n / 2, 0.5});
        } else {
            out.push_back({signed_f >= 0 ? signed_f : dest_n + signed_f, 1.0});
        }
        return out;
    };

    std::vector<std::complex<double>> g(static_cast<std::size_t>(hh) * ww,
                                        std::complex<double>(0.0, 0.0));
    for (int ky = 0; ky < h; ++ky) {
        const auto ys = spread(ky, h, hh);
        for (int kx = 0; kx < w; ++kx) {
            const auto xs = spread(kx, w, ww);
            const std::complex<double> v = f[static_cast<std::size_t>(ky) * w + kx];
            for (const auto& [dy, wy] : ys)
                for (const auto& [dx, wx] : xs)
                    g[static_cast<std::size_t>(dy) * ww + dx] += v * (wy * wx);
        }
    }
    fft::transform_2d(g.data(), hh, ww, true);

    ImageBuffer out(hh, ww, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = 4.0 * g[i].real();
    return out;
}

void require_map(const ImageBuffer& m, const char* who) {
    if (m.channels != 1) throw ArgumentError(std::string(who) + ": map must be single-channel");
    if (m.height < 8 || m.width < 8)
        throw ArgumentError(std::string(who) + ": maps must be at least 8x8");
    for (double v : m.data)
        if (!std::isfinite(v)) throw ArgumentError(std::string(who) + ": non-finite values");
}

bool is_constant(const ImageBuffer& m) {
    const auto [lo, hi] = std::minmax_element(m.data.begin(), m.data.end());
    return *lo == *hi;
}

}  // namespace

ShiftEstimate phase_correlate(const ImageBuffer& ref, const ImageBuffer& query) {
    require_map(ref, "phase_correlate");
    require_map(query, "phase_correlate");
    if (ref.height != query.height || ref.width != query.width)
        throw ArgumentError("phase_correlate: dims mismatch");
    if (is_constant(ref) || is_constant(query))
        throw DegenerateInputError("phase_correlate: constant map has no correlation peak");

    const int h = ref.height, w = ref.width;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<std::complex<double>> fa(n), fb(n);
    for (std::size_t i = 0; i < n; ++i) {
        fa[i] = ref.data[i];
        fb[i] = query.data[i];
    }
    fft::transform_2d(fa.data(), h, w, false);
    fft::transform_2d(fb.data(), h, w, false);

    constexpr double kEps = 1e-12;
    for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> c = fa[i] * std::conj(fb[i]);
        fa[i] = c / std::max(std::abs(c), kEps);
    }
    fft::transform_2d(fa.data(), h, w, true);

    std::size_t best = 0;
    double best_v = fa[0].real();
    for (std::size_t i = 1; i < n; ++i) {
        const double v = fa[i].real();
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    int py = static_cast<int>(best) / w;
    int px = static_cast<int>(best) % w;
    if (py > h / 2) py -= h;
    if (px > w / 2) px -= w;

    ShiftEstimate est;
    est.dy = py;
    est.dx = px;
    est.peak = best_v;
    return est;
}

ShiftEstimate estimate_vertical_subpixel_shift(const ImageBuffer& ref,
                                               const ImageBuffer& query) {
    require_map(ref, "estimate_vertical_subpixel_shift");
    require_map(query, "estimate_vertical_subpixel_shift");
    if (ref.height != query.height || ref.width != query.width)
        throw ArgumentError("estimate_vertical_subpixel_shift: dims mismatch");

    const ImageBuffer ref_up = upsample2x_spectral(ref);
    const ImageBuffer qry_up = upsample2x_spectral(query);
    ShiftEstimate est = phase_correlate(ref_up, qry_up);
    est.dy *= 0.5;
    est.dx = 0.0;
    return est;
}

ImageBuffer channel_mean_map(const Tensor& feats) {
    if (feats.channels < 1) throw ArgumentError("channel_mean_map: empty tensor");
    ImageBuffer map(feats.height, feats.width, 1);
    const std::size_t n = map.pixel_count();
    const double inv = 1.0 / feats.channels;
    for (int c = 0; c < feats.channels; ++c) {
        const double* plane = feats.plane(c);
        for (std::size_t i = 0; i < n; ++i) map.data[i] += plane[i];
    }
    for (std::size_t i = 0; i < n; ++i) map.data[i] *= inv;
    return map;
}

ShiftEstimate estimate_feature_shift(const Tensor& ref_feats, const Tensor& query_feats) {
    if (!ref_feats.same_shape(query_feats))
        throw ArgumentError("estimate_feature_shift: shape mismatch");
    return estimate_vertical_subpixel_shift(channel_mean_map(ref_feats),
                                            channel_mean_map(query_feats));
}

Tensor warp_features(const Tensor& feats, const ShiftEstimate& shift) {
    const int h = feats.height, w = feats.width;
    if (std::abs(shift.dy) >= h)
        throw ArgumentError("warp_features: |dy| must be smaller than the map height");
    for (double v : feats.data)
        if (!std::isfinite(v)) throw ArgumentError("warp_features: non-finite features");

    Tensor out(feats.channels, h, w);
    const int y0_of = static_cast<int>(std::floor(-shift.dy));  // row y samples y - dy
#pragma omp parallel for schedule(static)
    for (int c = 0; c < feats.channels; ++c) {
        const double* src = feats.plane(c);
        double* dst = out.plane(c);
        for (int y = 0; y < h; ++y) {
            const double sy = y - shift.dy;
            const int ya = std::clamp(y + y0_of, 0, h - 1);
            const int yb = std::clamp(y + y0_of + 1, 0, h - 1);
            const double f = sy - std::floor(sy);
            for (int x = 0; x < w; ++x)
                dst[y * w + x] = src[ya * w + x] * (1.0 - f) + src[yb * w + x] * f;
        }
    }
    return out;
}

Tensor warp_features_backward(const Tensor& grad_out, const ShiftEstimate& shift) {
    const int h = grad_out.height, w = grad_out.width;
    Tensor gx(grad_out.channels, h, w);
    const int y0_of = static_cast<int>(std::floor(-shift.dy));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < grad_out.channels; ++c) {
        const double* g = grad_out.plane(c);
        double* dst = gx.plane(c);
        for (int y = 0; y < h; ++y) {
            const double sy = y - shift.dy;
            const int ya = std::clamp(y + y0_of, 0, h - 1);
            const int yb = std::clamp(y + y0_of + 1, 0, h - 1);
            const double f = sy - std::floor(sy);
            for (int x = 0; x < w; ++x) {
                dst[ya * w + x] += g[y * w + x] * (1.0 - f);
                dst[yb * w + x] += g[y * w + x] * f;
            }
        }
    }
    return gx;
}

}  // namespace rootsr
