#pragma once

#include <cstdint>

#include "quadprior/image.hpp"

namespace qp {

// Procedural "normal light" RGB image: smooth color field (bilinear blend of
// four bright corner colors) plus a few soft-edged circles and rectangles.
// Fully determined by the seed; removes any dataset dependency.
ImageF synth_image(int width, int height, std::uint64_t seed);

}  // namespace qp
