#include "quadprior/synth.hpp"

#include <algorithm>
#include <cmath>

#include "quadprior/rng.hpp"

namespace qp {

namespace {
double smoothstep(double e0, double e1, double x) {
  double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}
}  // namespace

ImageF synth_image(int width, int height, std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, "synth"));

  // Bright-ish corner colors keep the distribution "normal light".
  double corner[4][3];
  for (auto& c : corner)
    for (double& v : c) v = 0.35 + 0.60 * rng.next_unit();

  ImageF img(width, height, 3);
  for (int y = 0; y < height; ++y) {
    double fy = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
    for (int x = 0; x < width; ++x) {
      double fx = width > 1 ? static_cast<double>(x) / (width - 1) : 0.0;
      for (int c = 0; c < 3; ++c) {
        double top = corner[0][c] * (1.0 - fx) + corner[1][c] * fx;
        double bot = corner[2][c] * (1.0 - fx) + corner[3][c] * fx;
        img.at(x, y, c) = static_cast<float>(top * (1.0 - fy) + bot * fy);
      }
    }
  }

  int n_shapes = 2 + static_cast<int>(rng.next_unit() * 4.0);  // 2..5
  for (int s = 0; s < n_shapes; ++s) {
    bool circle = rng.next_unit() < 0.5;
    double cx = rng.next_unit() * width;
    double cy = rng.next_unit() * height;
    double rad = (0.08 + 0.17 * rng.next_unit()) * std::min(width, height);
    double col[3];
    for (double& v : col) v = 0.20 + 0.78 * rng.next_unit();
    double hw = rad, hh = circle ? rad : rad * (0.5 + rng.next_unit());

    int x0 = std::max(0, static_cast<int>(cx - hw - 2)), x1 = std::min(width, static_cast<int>(cx + hw + 3));
    int y0 = std::max(0, static_cast<int>(cy - hh - 2)), y1 = std::min(height, static_cast<int>(cy + hh + 3));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        double cover;
        if (circle) {
          double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
          cover = 1.0 - smoothstep(rad - 1.0, rad + 1.0, d);
        } else {
          double dx = std::abs(x + 0.5 - cx), dy = std::abs(y + 0.5 - cy);
          cover = (1.0 - smoothstep(hw - 1.0, hw + 1.0, dx)) *
                  (1.0 - smoothstep(hh - 1.0, hh + 1.0, dy));
        }
        if (cover <= 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          double v = (1.0 - cover) * img.at(x, y, c) + cover * col[c];
          img.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
  }
  return img;
}

}  // namespace qp
