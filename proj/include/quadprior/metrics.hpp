#pragma once

#include "quadprior/image.hpp"

namespace qp {

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double L = 1.0;            // dynamic range
  double window_sigma = 1.5; // 11x11 window at sigma 1.5
};

struct MetricReport {
  double psnr = 0.0;  // dB
  double ssim = 0.0;  // <= 1
  double loe = 0.0;   // [0,1], 0 = perfect lightness-order preservation
};

// 10*log10(1/MSE) for [0,1]-range images, capped at 99 dB when MSE < 1e-10.
double psnr(const ImageF& a, const ImageF& b);

// Mean local SSIM over an 11x11 Gaussian window; RGB images average the three
// per-channel scores. Throws if the image is smaller than the window.
double ssim(const ImageF& a, const ImageF& b, const SsimParams& params = {});

// Lightness-order error: L = per-pixel max of RGB, both images independently
// area-downsampled to 50x50, then the fraction of ordered pixel pairs (p,q)
// whose ordering L(p) >= L(q) disagrees between the two.
double loe(const ImageF& enhanced, const ImageF& reference);

MetricReport evaluate_pair(const ImageF& enhanced, const ImageF& reference);

// Area-average resample to exactly out_w x out_h (used by loe; exposed for tests).
ImageF resize_area(const ImageF& img, int out_w, int out_h);

}  // namespace qp
