#pragma once

#include <string>

#include "rootsr/image.hpp"

namespace rootsr {

/// Decode an 8-bit gray or RGB PNG; sample v maps to v / 255.
/// Palette images are expanded to RGB, alpha is dropped. Bit depths other
/// than 8 raise FormatError; anything unreadable raises IoError.
ImageBuffer read_png(const std::string& path);

/// Encode as 8-bit gray (1 channel) or RGB (3 channels); v maps to
/// round(v * 255) after clamping. Round-trip error is at most 1/510.
void write_png(const std::string& path, const ImageBuffer& img);

}  // namespace rootsr
