#include "quadprior/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qp {

Kernel1D gaussian_kernel(double sigma, int order) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("gaussian_kernel: sigma must be positive and finite");
  if (order != 0 && order != 1)
    throw std::invalid_argument("gaussian_kernel: order must be 0 or 1");

  Kernel1D k;
  k.order = order;
  k.sigma = sigma;
  k.radius = static_cast<int>(std::ceil(3.0 * sigma));
  k.taps.resize(2 * k.radius + 1);

  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  for (int j = -k.radius; j <= k.radius; ++j) {
    double g = norm * std::exp(-0.5 * (j * j) / (sigma * sigma));
    k.taps[j + k.radius] = (order == 0) ? g : -(j / (sigma * sigma)) * g;
  }

  if (order == 0) {
    double s = 0.0;
    for (double t : k.taps) s += t;
    for (double& t : k.taps) t /= s;
  } else {
    // Subtracting the mean gives an exactly-zero response to constants
    // regardless of truncation.
    double s = 0.0;
    for (double t : k.taps) s += t;
    double c = s / static_cast<double>(k.taps.size());
    for (double& t : k.taps) t -= c;
  }
  return k;
}

namespace {

// One horizontal correlation pass over a single channel held in doubles.
void pass_x(const std::vector<double>& in, std::vector<double>& out, int w, int h,
            const Kernel1D& k) {
  for (int y = 0; y < h; ++y) {
    const double* row = in.data() + static_cast<std::size_t>(y) * w;
    double* orow = out.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -k.radius; j <= k.radius; ++j) {
        int xi = std::clamp(x + j, 0, w - 1);
        acc += k.taps[j + k.radius] * row[xi];
      }
      orow[x] = acc;
    }
  }
}

void pass_y(const std::vector<double>& in, std::vector<double>& out, int w, int h,
            const Kernel1D& k) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -k.radius; j <= k.radius; ++j) {
        int yi = std::clamp(y + j, 0, h - 1);
        acc += k.taps[j + k.radius] * in[static_cast<std::size_t>(yi) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
}

}  // namespace

ImageF conv_separable(const ImageF& img, const Kernel1D& kx, const Kernel1D& ky) {
  if (img.empty()) throw std::invalid_argument("conv_separable: empty image");
  if (kx.taps.empty() || ky.taps.empty())
    throw std::invalid_argument("conv_separable: empty kernel");

  const int w = img.width, h = img.height;
  ImageF out(w, h, img.channels);
  std::vector<double> plane(static_cast<std::size_t>(w) * h);
  std::vector<double> tmp(plane.size());

  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) plane[static_cast<std::size_t>(y) * w + x] = img.at(x, y, c);
    pass_x(plane, tmp, w, h, kx);
    pass_y(tmp, plane, w, h, ky);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(x, y, c) = static_cast<float>(plane[static_cast<std::size_t>(y) * w + x]);
  }
  return out;
}

}  // namespace qp
