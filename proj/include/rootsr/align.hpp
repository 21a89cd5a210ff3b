#pragma once

#include "rootsr/image.hpp"
#include "rootsr/tensor.hpp"

namespace rootsr {

/// Translation that maps the query onto the reference:
/// translate(query, dy, dx) best matches ref.
struct ShiftEstimate {
    double dy = 0.0;
    double dx = 0.0;
    double peak = 0.0;
};

/// Fourier-domain phase correlation between two equal-size single-channel
/// maps (>= 8x8). The cross-power spectrum is normalized per bin with an
/// epsilon floor of 1e-12; the integer peak of its inverse transform is the
/// shift, with indices above size/2 wrapped to negative.
/// Throws DegenerateInputError when either map is constant.
ShiftEstimate phase_correlate(const ImageBuffer& ref, const ImageBuffer& query);

/// Half-pixel vertical estimator: both maps are upsampled x2 by spectral
/// zero-padding, phase-correlated, the shift halved, and dx forced to zero
/// (misalignment in this capture geometry is vertical). Interpolating
/// upsamplers are unusable here: their alias band biases the whitened
/// correlation toward integer shifts.
ShiftEstimate estimate_vertical_subpixel_shift(const ImageBuffer& ref,
                                               const ImageBuffer& query);

/// Channel-wise mean, the reduction used before correlating feature stacks.
ImageBuffer channel_mean_map(const Tensor& feats);

/// estimate_vertical_subpixel_shift on the channel means of two stacks.
ShiftEstimate estimate_feature_shift(const Tensor& ref_feats, const Tensor& query_feats);

/// Applies translate(channel, shift.dy, 0) to every channel: bilinear
/// sampling, replicate boundary. Linear in the features; the shift itself
/// is a constant as far as gradients are concerned.
Tensor warp_features(const Tensor& feats, const ShiftEstimate& shift);

/// Adjoint of warp_features with respect to the features (used by training).
Tensor warp_features_backward(const Tensor& grad_out, const ShiftEstimate& shift);

}  // namespace rootsr
