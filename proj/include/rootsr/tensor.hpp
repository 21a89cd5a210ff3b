#pragma once

#include <cstddef>
#include <vector>

#include "rootsr/image.hpp"

namespace rootsr {

/// Channel-major feature map: data[(c * height + y) * width + x].
/// Unbounded real values; images convert at the network boundary.
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w, fill) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double* plane(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
    const double* plane(int c) const {
        return data.data() + static_cast<std::size_t>(c) * height * width;
    }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

Tensor tensor_from_image(const ImageBuffer& img);

/// channels must be 1 or 3; clamps to [0,1] when clamp is set (inference).
ImageBuffer image_from_tensor(const Tensor& t, bool clamp = true);

Tensor concat_channels(const std::vector<const Tensor*>& parts);

}  // namespace rootsr
