#pragma once

#include <cstddef>
#include <vector>

#include "rootsr/errors.hpp"

namespace rootsr {

/// H x W x C raster, channel-last, row-major, values in [0, 1].
/// 8-bit only at the PNG boundary; everything in between stays floating
/// point so quantization cannot accumulate across the pipeline.
struct ImageBuffer {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    ImageBuffer() = default;
    ImageBuffer(int h, int w, int c, double fill = 0.0);

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_dims(const ImageBuffer& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(height) * width;
    }
};

struct Rect {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;
};

enum class ResizeMode { Bilinear, Bicubic, Area };
enum class Boundary { Replicate, Zero };

ImageBuffer crop(const ImageBuffer& img, const Rect& r);

/// Area mode requires an exact integer downscale factor shared by both axes.
ImageBuffer resize(const ImageBuffer& img, int out_h, int out_w, ResizeMode mode);

/// Samples input at (y - dy, x - dx) with bilinear interpolation: positive
/// dy moves content downward. Every module inherits this sign convention.
ImageBuffer translate(const ImageBuffer& img, double dy, double dx,
                      Boundary boundary = Boundary::Replicate);

/// Luma weights 0.299 / 0.587 / 0.114; 1-channel input passes through.
ImageBuffer to_grayscale(const ImageBuffer& img);

}  // namespace rootsr
