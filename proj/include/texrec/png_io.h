#pragma once

#include <string>

#include "texrec/image.h"

namespace texrec {

/// Reads an 8- or 16-bit PNG into [0,1] doubles. Grayscale gives 1 channel,
/// RGB 3, RGBA 4; palette images are expanded to RGB.
Image read_png(const std::string& path);

/// Writes `img` clamped to [0,1] as PNG with the given bit depth (8 or 16).
/// 1, 3, and 4 channel images are supported.
void write_png(const std::string& path, const Image& img, int bit_depth = 8);

}  // namespace texrec
