#include "quadprior/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "quadprior/kernel.hpp"

namespace qp {

double psnr(const ImageF& a, const ImageF& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    acc += d * d;
  }
  double mse = acc / static_cast<double>(a.data.size());
  if (mse < 1e-10) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

double ssim_single(const ImageF& a, const ImageF& b, const SsimParams& p) {
  Kernel1D win = gaussian_kernel(p.window_sigma, 0);
  ImageF mu_a = conv_separable(a, win, win);
  ImageF mu_b = conv_separable(b, win, win);

  ImageF aa(a.width, a.height, 1), bb(a.width, a.height, 1), ab(a.width, a.height, 1);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    aa.data[i] = a.data[i] * a.data[i];
    bb.data[i] = b.data[i] * b.data[i];
    ab.data[i] = a.data[i] * b.data[i];
  }
  ImageF m_aa = conv_separable(aa, win, win);
  ImageF m_bb = conv_separable(bb, win, win);
  ImageF m_ab = conv_separable(ab, win, win);

  const double c1 = (p.k1 * p.L) * (p.k1 * p.L);
  const double c2 = (p.k2 * p.L) * (p.k2 * p.L);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double ma = mu_a.data[i], mb = mu_b.data[i];
    double va = static_cast<double>(m_aa.data[i]) - ma * ma;
    double vb = static_cast<double>(m_bb.data[i]) - mb * mb;
    double cov = static_cast<double>(m_ab.data[i]) - ma * mb;
    double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
    double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(a.data.size());
}

}  // namespace

double ssim(const ImageF& a, const ImageF& b, const SsimParams& params) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  Kernel1D win = gaussian_kernel(params.window_sigma, 0);
  int window = 2 * win.radius + 1;
  if (a.width < window || a.height < window)
    throw std::invalid_argument("ssim: image smaller than the local window");

  double acc = 0.0;
  for (int c = 0; c < a.channels; ++c) acc += ssim_single(a.channel(c), b.channel(c), params);
  return acc / a.channels;
}

ImageF resize_area(const ImageF& img, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw std::invalid_argument("resize_area: bad output dims");
  if (img.width == out_w && img.height == out_h) return img;

  ImageF out(out_w, out_h, img.channels);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    double y0 = oy * sy, y1 = (oy + 1) * sy;
    for (int ox = 0; ox < out_w; ++ox) {
      double x0 = ox * sx, x1 = (ox + 1) * sx;
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0, area = 0.0;
        for (int iy = static_cast<int>(std::floor(y0)); iy < std::ceil(y1); ++iy) {
          double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
          if (wy <= 0.0) continue;
          for (int ix = static_cast<int>(std::floor(x0)); ix < std::ceil(x1); ++ix) {
            double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
            if (wx <= 0.0) continue;
            int cy = std::clamp(iy, 0, img.height - 1);
            int cx = std::clamp(ix, 0, img.width - 1);
            acc += wx * wy * img.at(cx, cy, c);
            area += wx * wy;
          }
        }
        out.at(ox, oy, c) = static_cast<float>(acc / area);
      }
    }
  }
  return out;
}

namespace {

std::vector<double> lightness_grid(const ImageF& img) {
  ImageF small = resize_area(img, 50, 50);
  std::vector<double> light(static_cast<std::size_t>(small.width) * small.height);
  for (int y = 0; y < small.height; ++y)
    for (int x = 0; x < small.width; ++x) {
      double m = small.at(x, y, 0);
      for (int c = 1; c < small.channels; ++c) m = std::max(m, static_cast<double>(small.at(x, y, c)));
      light[static_cast<std::size_t>(y) * small.width + x] = m;
    }
  return light;
}

}  // namespace

double loe(const ImageF& enhanced, const ImageF& reference) {
  std::vector<double> le = lightness_grid(enhanced);
  std::vector<double> lr = lightness_grid(reference);
  const std::size_t n = le.size();
  std::size_t mismatches = 0;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q)
      if ((le[p] >= le[q]) != (lr[p] >= lr[q])) ++mismatches;
  return static_cast<double>(mismatches) / (static_cast<double>(n) * static_cast<double>(n));
}

MetricReport evaluate_pair(const ImageF& enhanced, const ImageF& reference) {
  MetricReport r;
  r.psnr = psnr(enhanced, reference);
  r.ssim = ssim(enhanced, reference);
  r.loe = loe(enhanced, reference);
  return r;
}

}  // namespace qp
