#pragma once

#include <vector>

#include "quadprior/image.hpp"

namespace qp {

// Odd-length 1-D filter. order 0 = smoothing (taps sum to 1),
// order 1 = derivative (taps sum to 0). Applied as correlation:
// out(x) = sum_j taps[j+radius] * in(x+j).
struct Kernel1D {
  std::vector<double> taps;
  int radius = 0;
  int order = 0;
  double sigma = 0.0;
};

// Sampled Gaussian (order 0) or its derivative (order 1) at integer offsets,
// radius = ceil(3*sigma). Order 0 is renormalized to sum exactly 1; order 1 is
// mean-corrected to sum exactly 0 so constants always map to zero.
Kernel1D gaussian_kernel(double sigma, int order);

// Per-channel separable pass: kx along x, then ky along y. Borders use edge
// replication. Accumulation in double, output stored as float.
ImageF conv_separable(const ImageF& img, const Kernel1D& kx, const Kernel1D& ky);

}  // namespace qp
