#pragma once

#include <cstddef>
#include <vector>

namespace qp {

// Floating-point raster: row-major, channel-interleaved. Photographic content
// lives in [0,1]; feature maps are unrestricted but must stay finite.
struct ImageF {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;  // size = width * height * channels

  ImageF() = default;
  ImageF(int w, int h, int c, float fill = 0.0f);

  float& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const ImageF& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool all_finite() const;

  // Single channel as a new 1-channel image.
  ImageF channel(int c) const;
};

// Elementwise a*x + b*y; shapes must match.
ImageF axpby(double a, const ImageF& x, double b, const ImageF& y);

// x scaled by k.
ImageF scaled(const ImageF& x, double k);

// Stack images channel-wise; all must share spatial dims.
ImageF concat_channels(const std::vector<const ImageF*>& parts);

// Clamp every element to [lo, hi].
ImageF clamped(const ImageF& x, float lo, float hi);

double mean_value(const ImageF& x);

// RMS of (a-b) over pixels where mask is nonzero; mask has 1 channel and the
// same spatial dims. Returns 0 when the mask is empty.
double masked_rms_diff(const ImageF& a, const ImageF& b, const ImageF& mask);

}  // namespace qp
