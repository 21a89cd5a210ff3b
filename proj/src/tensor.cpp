#include "rootsr/tensor.hpp"

#include <algorithm>

namespace rootsr {

Tensor tensor_from_image(const ImageBuffer& img) {
    Tensor t(img.channels, img.height, img.width);
    const std::size_t n = img.pixel_count();
    for (int c = 0; c < img.channels; ++c) {
        double* plane = t.plane(c);
        for (std::size_t i = 0; i < n; ++i) plane[i] = img.data[i * img.channels + c];
    }
    return t;
}

ImageBuffer image_from_tensor(const Tensor& t, bool clamp) {
    if (t.channels != 1 && t.channels != 3)
        throw ArgumentError("image_from_tensor: tensor must have 1 or 3 channels");
    ImageBuffer img(t.height, t.width, t.channels);
    const std::size_t n = img.pixel_count();
    for (int c = 0; c < t.channels; ++c) {
        const double* plane = t.plane(c);
        for (std::size_t i = 0; i < n; ++i) {
            img.data[i * t.channels + c] = clamp ? std::clamp(plane[i], 0.0, 1.0) : plane[i];
        }
    }
    return img;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) throw ArgumentError("concat_channels: no inputs");
    int total = 0;
    for (const Tensor* p : parts) {
        if (p->height != parts[0]->height || p->width != parts[0]->width)
            throw ArgumentError("concat_channels: spatial dims mismatch");
        total += p->channels;
    }
    Tensor out(total, parts[0]->height, parts[0]->width);
    std::size_t offset = 0;
    for (const Tensor* p : parts) {
        std::copy(p->data.begin(), p->data.end(), out.data.begin() + offset);
        offset += p->size();
    }
    return out;
}

}  // namespace rootsr
