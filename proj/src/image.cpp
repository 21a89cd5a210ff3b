#include "rootsr/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rootsr/kernels.hpp"

namespace rootsr {

namespace {

void require_valid(const ImageBuffer& img, const char* who) {
    if (img.height <= 0 || img.width <= 0)
        throw ArgumentError(std::string(who) + ": empty image");
    if (img.channels != 1 && img.channels != 3)
        throw ArgumentError(std::string(who) + ": channels must be 1 or 3");
    if (img.data.size() != img.pixel_count() * img.channels)
        throw ArgumentError(std::string(who) + ": data size does not match dims");
}

// Channel-last image -> one contiguous plane per channel and back.
std::vector<double> extract_plane(const ImageBuffer& img, int c) {
    std::vector<double> plane(img.pixel_count());
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) plane[i] = img.data[i * img.channels + c];
    return plane;
}

void insert_plane(ImageBuffer& img, int c, const std::vector<double>& plane) {
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) img.data[i * img.channels + c] = plane[i];
}

}  // namespace

ImageBuffer::ImageBuffer(int h, int w, int c, double fill) {
    if (h <= 0 || w <= 0) throw ArgumentError("ImageBuffer: non-positive dims");
    if (c != 1 && c != 3) throw ArgumentError("ImageBuffer: channels must be 1 or 3");
    height = h;
    width = w;
    channels = c;
    data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

ImageBuffer crop(const ImageBuffer& img, const Rect& r) {
    require_valid(img, "crop");
    if (r.top < 0 || r.left < 0 || r.height <= 0 || r.width <= 0 ||
        r.top + r.height > img.height || r.left + r.width > img.width)
        throw BoundsError("crop: rect (" + std::to_string(r.top) + "," +
                          std::to_string(r.left) + "," + std::to_string(r.height) +
                          "," + std::to_string(r.width) + ") outside " +
                          std::to_string(img.height) + "x" + std::to_string(img.width));
    ImageBuffer out(r.height, r.width, img.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(r.width) * img.channels;
    for (int y = 0; y < r.height; ++y) {
        const double* src = &img.data[(static_cast<std::size_t>(r.top + y) * img.width +
                                       r.left) * img.channels];
        std::copy(src, src + row_bytes,
                  &out.data[static_cast<std::size_t>(y) * row_bytes]);
    }
    return out;
}

ImageBuffer resize(const ImageBuffer& img, int out_h, int out_w, ResizeMode mode) {
    require_valid(img, "resize");
    if (out_h < 1 || out_w < 1) throw ArgumentError("resize: output dims must be >= 1");
    if (mode == ResizeMode::Area) {
        if (out_h > img.height || out_w > img.width ||
            img.height % out_h != 0 || img.width % out_w != 0 ||
            img.height / out_h != img.width / out_w)
            throw ArgumentError("resize: area mode needs one integer downscale factor, got " +
                                std::to_string(img.height) + "x" + std::to_string(img.width) +
                                " -> " + std::to_string(out_h) + "x" + std::to_string(out_w));
    }
    ImageBuffer out(out_h, out_w, img.channels);
    std::vector<double> dst(out.pixel_count());
    for (int c = 0; c < img.channels; ++c) {
        const std::vector<double> src = extract_plane(img, c);
        switch (mode) {
            case ResizeMode::Bilinear:
                kernels::resize_bilinear(src.data(), img.height, img.width,
                                         dst.data(), out_h, out_w);
                break;
            case ResizeMode::Bicubic:
                kernels::resize_bicubic(src.data(), img.height, img.width,
                                        dst.data(), out_h, out_w);
                break;
            case ResizeMode::Area:
                kernels::downscale_area(src.data(), img.height, img.width,
                                        dst.data(), out_h, out_w);
                break;
        }
        insert_plane(out, c, dst);
    }
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

ImageBuffer translate(const ImageBuffer& img, double dy, double dx, Boundary boundary) {
    require_valid(img, "translate");
    if (std::abs(dy) >= img.height || std::abs(dx) >= img.width)
        throw ArgumentError("translate: |shift| must be smaller than the image");
    ImageBuffer out(img.height, img.width, img.channels);
    std::vector<double> dst(img.pixel_count());
    for (int c = 0; c < img.channels; ++c) {
        const std::vector<double> src = extract_plane(img, c);
        kernels::translate_bilinear(src.data(), img.height, img.width, dy, dx,
                                    boundary == Boundary::Zero, dst.data());
        insert_plane(out, c, dst);
    }
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

ImageBuffer to_grayscale(const ImageBuffer& img) {
    require_valid(img, "to_grayscale");
    if (img.channels == 1) return img;
    ImageBuffer out(img.height, img.width, 1);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        out.data[i] = 0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] +
                      0.114 * img.data[i * 3 + 2];
    }
    return out;
}

}  // namespace rootsr
