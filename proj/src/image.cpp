#include "quadprior/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qp {

ImageF::ImageF(int w, int h, int c, float fill) : width(w), height(h), channels(c) {
  if (w <= 0 || h <= 0 || c <= 0)
    throw std::invalid_argument("ImageF: dimensions must be positive");
  data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

bool ImageF::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

ImageF ImageF::channel(int c) const {
  if (c < 0 || c >= channels) throw std::invalid_argument("ImageF::channel: index out of range");
  ImageF out(width, height, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.at(x, y, 0) = at(x, y, c);
  return out;
}

ImageF axpby(double a, const ImageF& x, double b, const ImageF& y) {
  if (!x.same_shape(y)) throw std::invalid_argument("axpby: shape mismatch");
  ImageF out(x.width, x.height, x.channels);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    out.data[i] = static_cast<float>(a * x.data[i] + b * y.data[i]);
  return out;
}

ImageF scaled(const ImageF& x, double k) {
  ImageF out = x;
  for (float& v : out.data) v = static_cast<float>(k * v);
  return out;
}

ImageF concat_channels(const std::vector<const ImageF*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  int w = parts[0]->width, h = parts[0]->height, c = 0;
  for (const ImageF* p : parts) {
    if (p->width != w || p->height != h)
      throw std::invalid_argument("concat_channels: spatial dims differ");
    c += p->channels;
  }
  ImageF out(w, h, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int co = 0;
      for (const ImageF* p : parts)
        for (int ci = 0; ci < p->channels; ++ci) out.at(x, y, co++) = p->at(x, y, ci);
    }
  return out;
}

ImageF clamped(const ImageF& x, float lo, float hi) {
  ImageF out = x;
  for (float& v : out.data) v = std::clamp(v, lo, hi);
  return out;
}

double mean_value(const ImageF& x) {
  double s = 0.0;
  for (float v : x.data) s += v;
  return x.data.empty() ? 0.0 : s / static_cast<double>(x.data.size());
}

double masked_rms_diff(const ImageF& a, const ImageF& b, const ImageF& mask) {
  if (!a.same_shape(b)) throw std::invalid_argument("masked_rms_diff: shape mismatch");
  if (mask.width != a.width || mask.height != a.height || mask.channels != 1)
    throw std::invalid_argument("masked_rms_diff: bad mask shape");
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (mask.at(x, y, 0) == 0.0f) continue;
      for (int c = 0; c < a.channels; ++c) {
        double d = static_cast<double>(a.at(x, y, c)) - static_cast<double>(b.at(x, y, c));
        acc += d * d;
        ++n;
      }
    }
  return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

}  // namespace qp
