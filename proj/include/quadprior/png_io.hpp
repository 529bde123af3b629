#pragma once

#include <string>

#include "quadprior/image.hpp"

namespace qp {

// 8-bit grayscale or RGB PNG -> floats in [0,1] (value/255). Palette images
// are expanded to RGB; alpha is stripped. 16-bit files are rejected.
ImageF load_png(const std::string& path);

// Clamp to [0,1], scale by 255 and round half-away-from-zero. channels must
// be 1 (gray) or 3 (RGB).
void save_png(const ImageF& img, const std::string& path);

}  // namespace qp
