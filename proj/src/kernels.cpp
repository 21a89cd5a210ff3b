#include "rootsr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

// Both variants of every kernel route each output row through the same
// helper, so parallel and serial results are bit-identical; only the loop
// scheduling differs. The helpers are noinline so the compiler cannot
// specialize (e.g. contract into FMA) differently per call site.

#if defined(__GNUC__) || defined(__clang__)
#define ROOTSR_NOINLINE __attribute__((noinline))
#else
#define ROOTSR_NOINLINE
#endif

namespace rootsr::kernels {

// Team spawn costs more than the loop itself on small tensors; below these
// sizes the parallel entry points dispatch to the serial references (same
// arithmetic, so results stay bit-identical either way).
constexpr std::size_t kOmpMinPixels = 16384;
constexpr std::size_t kOmpMinWork = 1u << 20;

namespace {

inline std::size_t conv_work(int in_c, int h, int w, int out_c, int k) {
    return static_cast<std::size_t>(in_c) * h * w * out_c * k * k;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

inline double bilinear_at(const double* src, int h, int w, double sy, double sx) {
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const double fy = sy - y0;
    const double fx = sx - x0;
    const int ya = clampi(y0, 0, h - 1), yb = clampi(y0 + 1, 0, h - 1);
    const int xa = clampi(x0, 0, w - 1), xb = clampi(x0 + 1, 0, w - 1);
    const double top = src[ya * w + xa] * (1.0 - fx) + src[ya * w + xb] * fx;
    const double bot = src[yb * w + xa] * (1.0 - fx) + src[yb * w + xb] * fx;
    return top * (1.0 - fy) + bot * fy;
}

ROOTSR_NOINLINE void resize_bilinear_row(const double* src, int in_h, int in_w,
                                double* dst, int out_h, int out_w, int oy) {
    const double sy = (oy + 0.5) * static_cast<double>(in_h) / out_h - 0.5;
    for (int ox = 0; ox < out_w; ++ox) {
        const double sx = (ox + 0.5) * static_cast<double>(in_w) / out_w - 0.5;
        dst[oy * out_w + ox] = bilinear_at(src, in_h, in_w, sy, sx);
    }
}

// Catmull-Rom weights, a = -0.5, for fractional offset t in [0, 1).
inline void cubic_weights(double t, double wgt[4]) {
    const double t2 = t * t, t3 = t2 * t;
    wgt[0] = -0.5 * t3 + t2 - 0.5 * t;
    wgt[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
    wgt[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
    wgt[3] = 0.5 * t3 - 0.5 * t2;
}

ROOTSR_NOINLINE void resize_bicubic_row(const double* src, int in_h, int in_w,
                               double* dst, int out_h, int out_w, int oy) {
    const double sy = (oy + 0.5) * static_cast<double>(in_h) / out_h - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    double wy[4];
    cubic_weights(sy - y0, wy);
    for (int ox = 0; ox < out_w; ++ox) {
        const double sx = (ox + 0.5) * static_cast<double>(in_w) / out_w - 0.5;
        const int x0 = static_cast<int>(std::floor(sx));
        double wx[4];
        cubic_weights(sx - x0, wx);
        double acc = 0.0;
        for (int i = 0; i < 4; ++i) {
            const int yy = clampi(y0 - 1 + i, 0, in_h - 1);
            double row = 0.0;
            for (int j = 0; j < 4; ++j) {
                const int xx = clampi(x0 - 1 + j, 0, in_w - 1);
                row += wx[j] * src[yy * in_w + xx];
            }
            acc += wy[i] * row;
        }
        dst[oy * out_w + ox] = acc;
    }
}

ROOTSR_NOINLINE void downscale_area_row(const double* src, int in_w,
                               double* dst, int out_w, int factor, int oy) {
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int ox = 0; ox < out_w; ++ox) {
        double s = 0.0;
        for (int by = 0; by < factor; ++by) {
            const double* row = src + (oy * factor + by) * in_w + ox * factor;
            for (int bx = 0; bx < factor; ++bx) s += row[bx];
        }
        dst[oy * out_w + ox] = s * inv;
    }
}

inline double sample_boundary(const double* src, int h, int w, int y, int x,
                              bool zero_boundary) {
    if (zero_boundary) {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
        return src[y * w + x];
    }
    return src[clampi(y, 0, h - 1) * w + clampi(x, 0, w - 1)];
}

ROOTSR_NOINLINE void translate_row(const double* src, int h, int w, double dy, double dx,
                          bool zero_boundary, double* dst, int y) {
    const double sy = y - dy;
    const int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    for (int x = 0; x < w; ++x) {
        const double sx = x - dx;
        const int x0 = static_cast<int>(std::floor(sx));
        const double fx = sx - x0;
        const double p00 = sample_boundary(src, h, w, y0, x0, zero_boundary);
        const double p01 = sample_boundary(src, h, w, y0, x0 + 1, zero_boundary);
        const double p10 = sample_boundary(src, h, w, y0 + 1, x0, zero_boundary);
        const double p11 = sample_boundary(src, h, w, y0 + 1, x0 + 1, zero_boundary);
        dst[y * w + x] = (p00 * (1.0 - fx) + p01 * fx) * (1.0 - fy) +
                         (p10 * (1.0 - fx) + p11 * fx) * fy;
    }
}

// Accumulates along contiguous rows so the inner loop vectorizes.
ROOTSR_NOINLINE void conv2d_forward_point(const double* x, int in_c, int h, int w,
                                 const double* wgt, const double* bias,
                                 int k, int o, int r, double* out_row) {
    const int pad = k / 2;
    for (int c = 0; c < w; ++c) out_row[c] = bias[o];
    for (int i = 0; i < in_c; ++i) {
        const double* plane = x + static_cast<std::size_t>(i) * h * w;
        const double* wk = wgt + (static_cast<std::size_t>(o) * in_c + i) * k * k;
        for (int dy = 0; dy < k; ++dy) {
            const int yy = r + dy - pad;
            if (yy < 0 || yy >= h) continue;
            const double* srow = plane + static_cast<std::size_t>(yy) * w;
            for (int dx = 0; dx < k; ++dx) {
                const double wv = wk[dy * k + dx];
                const int off = dx - pad;
                const int lo = off < 0 ? -off : 0;
                const int hi = off > 0 ? w - off : w;
                for (int c = lo; c < hi; ++c) out_row[c] += wv * srow[c + off];
            }
        }
    }
}

ROOTSR_NOINLINE void conv2d_backward_input_point(const double* gy, int out_c, int h, int w,
                                        const double* wgt, int in_c, int k,
                                        int i, int a, double* gx_row) {
    const int pad = k / 2;
    for (int b = 0; b < w; ++b) gx_row[b] = 0.0;
    for (int o = 0; o < out_c; ++o) {
        const double* gplane = gy + static_cast<std::size_t>(o) * h * w;
        const double* wk = wgt + (static_cast<std::size_t>(o) * in_c + i) * k * k;
        for (int dy = 0; dy < k; ++dy) {
            const int r = a - dy + pad;
            if (r < 0 || r >= h) continue;
            const double* grow = gplane + static_cast<std::size_t>(r) * w;
            for (int dx = 0; dx < k; ++dx) {
                const double wv = wk[dy * k + dx];
                const int off = pad - dx;
                const int lo = off < 0 ? -off : 0;
                const int hi = off > 0 ? w - off : w;
                for (int b = lo; b < hi; ++b) gx_row[b] += wv * grow[b + off];
            }
        }
    }
}

ROOTSR_NOINLINE void conv2d_backward_params_one(const double* x, int in_c, int h, int w,
                                       const double* gy, int k,
                                       int o, double* gw, double* gb) {
    const int pad = k / 2;
    const double* gplane = gy + static_cast<std::size_t>(o) * h * w;
    double bacc = 0.0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) bacc += gplane[r * w + c];
    gb[o] += bacc;
    for (int i = 0; i < in_c; ++i) {
        const double* plane = x + static_cast<std::size_t>(i) * h * w;
        double* wk = gw + (static_cast<std::size_t>(o) * in_c + i) * k * k;
        for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
                double acc = 0.0;
                const int r_lo = std::max(0, pad - dy);
                const int r_hi = std::min(h, h + pad - dy);
                const int c_lo = std::max(0, pad - dx);
                const int c_hi = std::min(w, w + pad - dx);
                for (int r = r_lo; r < r_hi; ++r) {
                    const double* grow = gplane + r * w;
                    const double* srow = plane + (r + dy - pad) * w;
                    for (int c = c_lo; c < c_hi; ++c) acc += grow[c] * srow[c + dx - pad];
                }
                wk[dy * k + dx] += acc;
            }
        }
    }
}

}  // namespace

void resize_bilinear(const double* src, int in_h, int in_w,
                     double* dst, int out_h, int out_w) {
    if (static_cast<std::size_t>(out_h) * out_w < kOmpMinPixels) {
        serial::resize_bilinear(src, in_h, in_w, dst, out_h, out_w);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < out_h; ++oy)
        resize_bilinear_row(src, in_h, in_w, dst, out_h, out_w, oy);
}

void resize_bicubic(const double* src, int in_h, int in_w,
                    double* dst, int out_h, int out_w) {
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < out_h; ++oy)
        resize_bicubic_row(src, in_h, in_w, dst, out_h, out_w, oy);
}

void downscale_area(const double* src, int in_h, int in_w,
                    double* dst, int out_h, int out_w) {
    if (static_cast<std::size_t>(in_h) * in_w < kOmpMinPixels) {
        serial::downscale_area(src, in_h, in_w, dst, out_h, out_w);
        return;
    }
    const int factor = in_h / out_h;
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < out_h; ++oy)
        downscale_area_row(src, in_w, dst, out_w, factor, oy);
}

void translate_bilinear(const double* src, int h, int w,
                        double dy, double dx, bool zero_boundary, double* dst) {
    if (static_cast<std::size_t>(h) * w < kOmpMinPixels) {
        serial::translate_bilinear(src, h, w, dy, dx, zero_boundary, dst);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        translate_row(src, h, w, dy, dx, zero_boundary, dst, y);
}

namespace {

// Patch matrix for the GEMM-shaped convolutions: row p = output pixel,
// column block k = (channel, dy, dx) ascending. Out-of-image taps are zero.
void build_patch_rows(const double* x, int in_c, int h, int w, int k,
                      std::vector<double>& col) {
    const int pad = k / 2;
    const std::size_t kk = static_cast<std::size_t>(in_c) * k * k;
    col.assign(static_cast<std::size_t>(h) * w * kk, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double* row = col.data() + (static_cast<std::size_t>(r) * w + c) * kk;
            std::size_t slot = 0;
            for (int i = 0; i < in_c; ++i) {
                const double* plane = x + static_cast<std::size_t>(i) * h * w;
                for (int dy = 0; dy < k; ++dy) {
                    const int yy = r + dy - pad;
                    for (int dx = 0; dx < k; ++dx, ++slot) {
                        const int xx = c + dx - pad;
                        if (yy >= 0 && yy < h && xx >= 0 && xx < w)
                            row[slot] = plane[static_cast<std::size_t>(yy) * w + xx];
                    }
                }
            }
        }
}

// Transposed layout, row k = tap, for the weight-gradient GEMM.
void build_patch_cols(const double* x, int in_c, int h, int w, int k,
                      std::vector<double>& colt) {
    const int pad = k / 2;
    const std::size_t np = static_cast<std::size_t>(h) * w;
    colt.assign(static_cast<std::size_t>(in_c) * k * k * np, 0.0);
    std::size_t slot = 0;
    for (int i = 0; i < in_c; ++i) {
        const double* plane = x + static_cast<std::size_t>(i) * h * w;
        for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx, ++slot) {
                double* row = colt.data() + slot * np;
                for (int r = 0; r < h; ++r) {
                    const int yy = r + dy - pad;
                    if (yy < 0 || yy >= h) continue;
                    const double* srow = plane + static_cast<std::size_t>(yy) * w;
                    const int lo = std::max(0, pad - dx);
                    const int hi = std::min(w, w + pad - dx);
                    for (int c = lo; c < hi; ++c) row[r * w + c] = srow[c + dx - pad];
                }
            }
    }
}

// Eight-lane striped dot product: fixed association order, vectorizable.
ROOTSR_NOINLINE double dot_striped(const double* __restrict a,
                                   const double* __restrict b, std::size_t n) {
    double a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 += a[i] * b[i];
        a1 += a[i + 1] * b[i + 1];
        a2 += a[i + 2] * b[i + 2];
        a3 += a[i + 3] * b[i + 3];
        a4 += a[i + 4] * b[i + 4];
        a5 += a[i + 5] * b[i + 5];
        a6 += a[i + 6] * b[i + 6];
        a7 += a[i + 7] * b[i + 7];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return (((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))) + tail;
}

}  // namespace

// The patch-matrix (im2col) formulation wins while the matrix stays
// cache-resident; above that the shifted-row accumulation wins. Either
// branch is deterministic on its own; tests compare both against the serial
// reference to rounding.
constexpr std::size_t kIm2colMaxBytes = 1u << 20;

void conv2d_forward(const double* x, int in_c, int h, int w,
                    const double* wgt, const double* bias,
                    int out_c, int k, double* y) {
    const std::size_t kk = static_cast<std::size_t>(in_c) * k * k;
    const std::int64_t np = static_cast<std::int64_t>(h) * w;
    const bool wide = conv_work(in_c, h, w, out_c, k) >= kOmpMinWork;
    if (kk * static_cast<std::size_t>(np) * sizeof(double) > kIm2colMaxBytes) {
#pragma omp parallel for collapse(2) schedule(static) if (wide)
        for (int o = 0; o < out_c; ++o)
            for (int r = 0; r < h; ++r)
                conv2d_forward_point(x, in_c, h, w, wgt, bias, k, o, r,
                                     y + (static_cast<std::size_t>(o) * h + r) * w);
        return;
    }
    std::vector<double> col;
    build_patch_rows(x, in_c, h, w, k, col);
#pragma omp parallel for schedule(static) if (wide)
    for (std::int64_t p = 0; p < np; ++p) {
        const double* row = col.data() + static_cast<std::size_t>(p) * kk;
        for (int o = 0; o < out_c; ++o)
            y[static_cast<std::size_t>(o) * np + p] =
                bias[o] + dot_striped(wgt + static_cast<std::size_t>(o) * kk, row, kk);
    }
}

void conv2d_backward_input(const double* gy, int out_c, int h, int w,
                           const double* wgt, int in_c, int k, double* gx) {
    const std::size_t kk = static_cast<std::size_t>(out_c) * k * k;
    const std::int64_t np = static_cast<std::int64_t>(h) * w;
    const bool wide = conv_work(in_c, h, w, out_c, k) >= kOmpMinWork;
    if (kk * static_cast<std::size_t>(np) * sizeof(double) > kIm2colMaxBytes) {
#pragma omp parallel for collapse(2) schedule(static) if (wide)
        for (int i = 0; i < in_c; ++i)
            for (int a = 0; a < h; ++a)
                conv2d_backward_input_point(gy, out_c, h, w, wgt, in_c, k, i, a,
                                            gx + (static_cast<std::size_t>(i) * h + a) * w);
        return;
    }
    // gx = gy convolved with the flipped kernels: repack weights so tap
    // order (o, dy', dx') ascending matches the gy patch rows
    std::vector<double> flipped(static_cast<std::size_t>(in_c) * kk);
    for (int i = 0; i < in_c; ++i)
        for (int o = 0; o < out_c; ++o)
            for (int dy = 0; dy < k; ++dy)
                for (int dx = 0; dx < k; ++dx)
                    flipped[((static_cast<std::size_t>(i) * out_c + o) * k +
                             (k - 1 - dy)) * k + (k - 1 - dx)] =
                        wgt[((static_cast<std::size_t>(o) * in_c + i) * k + dy) * k + dx];
    std::vector<double> col;
    build_patch_rows(gy, out_c, h, w, k, col);
#pragma omp parallel for schedule(static) if (wide)
    for (std::int64_t p = 0; p < np; ++p) {
        const double* row = col.data() + static_cast<std::size_t>(p) * kk;
        for (int i = 0; i < in_c; ++i)
            gx[static_cast<std::size_t>(i) * np + p] =
                dot_striped(flipped.data() + static_cast<std::size_t>(i) * kk, row, kk);
    }
}

void conv2d_backward_params(const double* x, int in_c, int h, int w,
                            const double* gy, int out_c, int k,
                            double* gw, double* gb) {
    const std::size_t kk = static_cast<std::size_t>(in_c) * k * k;
    const std::size_t np = static_cast<std::size_t>(h) * w;
    std::vector<double> colt;
    build_patch_cols(x, in_c, h, w, k, colt);
    const bool wide = conv_work(in_c, h, w, out_c, k) >= kOmpMinWork;
#pragma omp parallel for schedule(static) if (wide)
    for (int o = 0; o < out_c; ++o) {
        const double* grow = gy + static_cast<std::size_t>(o) * np;
        double bacc = 0.0;
        for (std::size_t p = 0; p < np; ++p) bacc += grow[p];
        gb[o] += bacc;
        for (std::size_t t = 0; t < kk; ++t)
            gw[static_cast<std::size_t>(o) * kk + t] +=
                dot_striped(grow, colt.data() + t * np, np);
    }
}

namespace serial {

void resize_bilinear(const double* src, int in_h, int in_w,
                     double* dst, int out_h, int out_w) {
    for (int oy = 0; oy < out_h; ++oy)
        resize_bilinear_row(src, in_h, in_w, dst, out_h, out_w, oy);
}

void downscale_area(const double* src, int in_h, int in_w,
                    double* dst, int out_h, int out_w) {
    const int factor = in_h / out_h;
    for (int oy = 0; oy < out_h; ++oy)
        downscale_area_row(src, in_w, dst, out_w, factor, oy);
}

void translate_bilinear(const double* src, int h, int w,
                        double dy, double dx, bool zero_boundary, double* dst) {
    for (int y = 0; y < h; ++y)
        translate_row(src, h, w, dy, dx, zero_boundary, dst, y);
}

void conv2d_forward(const double* x, int in_c, int h, int w,
                    const double* wgt, const double* bias,
                    int out_c, int k, double* y) {
    for (int o = 0; o < out_c; ++o)
        for (int r = 0; r < h; ++r)
            conv2d_forward_point(x, in_c, h, w, wgt, bias, k, o, r,
                                 y + (static_cast<std::size_t>(o) * h + r) * w);
}

void conv2d_backward_input(const double* gy, int out_c, int h, int w,
                           const double* wgt, int in_c, int k, double* gx) {
    for (int i = 0; i < in_c; ++i)
        for (int a = 0; a < h; ++a)
            conv2d_backward_input_point(gy, out_c, h, w, wgt, in_c, k, i, a,
                                        gx + (static_cast<std::size_t>(i) * h + a) * w);
}

void conv2d_backward_params(const double* x, int in_c, int h, int w,
                            const double* gy, int out_c, int k,
                            double* gw, double* gb) {
    for (int o = 0; o < out_c; ++o)
        conv2d_backward_params_one(x, in_c, h, w, gy, k, o, gw, gb);
}

}  // namespace serial

}  // namespace rootsr::kernels
