#pragma once

#include <cstddef>

// Hot inner loops shared by the imaging and network modules. Every kernel
// here has an OpenMP-parallel primary and a plain serial reference under
// kernels::serial; the two are element-for-element identical arithmetic
// (tests assert bit equality) and tools/bench.cpp compares their throughput.
//
// Plane layout: row-major h*w doubles. Tensor layout: channel-major
// data[(c*h + y)*w + x].

namespace rootsr::kernels {

/// Bilinear resample of one plane; pixel centers at (i + 0.5) * in/out - 0.5,
/// edge-clamped.
void resize_bilinear(const double* src, int in_h, int in_w,
                     double* dst, int out_h, int out_w);

/// Catmull-Rom bicubic (a = -0.5), separable 4-tap, edge-clamped; caller
/// clamps the value range.
void resize_bicubic(const double* src, int in_h, int in_w,
                    double* dst, int out_h, int out_w);

/// Block-mean downscale by integer factor (in_h == factor * out_h).
void downscale_area(const double* src, int in_h, int in_w,
                    double* dst, int out_h, int out_w);

/// dst(y, x) = bilinear sample of src at (y - dy, x - dx). Out-of-range
/// samples are edge-clamped (replicate) or zero.
void translate_bilinear(const double* src, int h, int w,
                        double dy, double dx, bool zero_boundary, double* dst);

/// 2D convolution, kernel k x k (odd), zero padding k/2, stride 1.
/// x: in_c channel-major planes; w: [out_c][in_c][k][k]; b: [out_c];
/// y: out_c planes, same h x w.
void conv2d_forward(const double* x, int in_c, int h, int w,
                    const double* wgt, const double* bias,
                    int out_c, int k, double* y);

/// Gradient w.r.t. the convolution input (gather form, deterministic).
void conv2d_backward_input(const double* gy, int out_c, int h, int w,
                           const double* wgt, int in_c, int k, double* gx);

/// Accumulate gradients w.r.t. weights and bias into gw / gb (+=).
/// Parallel over out_c: each thread owns a disjoint gw/gb slice.
void conv2d_backward_params(const double* x, int in_c, int h, int w,
                            const double* gy, int out_c, int k,
                            double* gw, double* gb);

namespace serial {

void resize_bilinear(const double* src, int in_h, int in_w,
                     double* dst, int out_h, int out_w);
void downscale_area(const double* src, int in_h, int in_w,
                    double* dst, int out_h, int out_w);
void translate_bilinear(const double* src, int h, int w,
                        double dy, double dx, bool zero_boundary, double* dst);
void conv2d_forward(const double* x, int in_c, int h, int w,
                    const double* wgt, const double* bias,
                    int out_c, int k, double* y);
void conv2d_backward_input(const double* gy, int out_c, int h, int w,
                           const double* wgt, int in_c, int k, double* gx);
void conv2d_backward_params(const double* x, int in_c, int h, int w,
                            const double* gy, int out_c, int k,
                            double* gw, double* gb);

}  // namespace serial

}  // namespace rootsr::kernels
