#include "quadprior/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "quadprior/rng.hpp"

namespace qp::nn {

Tensor from_image(const ImageF& img) {
  Tensor t(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) t.at(c, y, x) = img.at(x, y, c);
  return t;
}

ImageF to_image(const Tensor& t) {
  ImageF img(t.w, t.h, t.c);
  for (int c = 0; c < t.c; ++c)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) img.at(x, y, c) = static_cast<float>(t.at(c, y, x));
  return img;
}

namespace {
double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return 0.0;
  return std::log1p(std::exp(x));
}
double sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

double act(double x) {
  return ACT_LEAK * x + (1.0 - ACT_LEAK) * softplus(ACT_SHARPNESS * x) / ACT_SHARPNESS;
}

double act_deriv(double x) { return ACT_LEAK + (1.0 - ACT_LEAK) * sigmoid(ACT_SHARPNESS * x); }

Tensor act_forward(const Tensor& in) {
  Tensor out(in.c, in.h, in.w);
  for (std::size_t i = 0; i < in.v.size(); ++i) out.v[i] = act(in.v[i]);
  return out;
}

void act_backward(const Tensor& pre, const Tensor& dout, Tensor& din) {
  for (std::size_t i = 0; i < pre.v.size(); ++i) din.v[i] += act_deriv(pre.v[i]) * dout.v[i];
}

Tensor conv2d_forward(const Tensor& in, const double* w, const double* bias, int out_ch,
                      int ksize) {
  const int pad = ksize / 2;
  const int H = in.h, W = in.w, C = in.c;
  Tensor out(out_ch, H, W);
  for (int co = 0; co < out_ch; ++co) {
    if (bias) {
      double b = bias[co];
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) out.at(co, y, x) = b;
    }
    for (int ci = 0; ci < C; ++ci) {
      const double* wp = w + ((static_cast<std::size_t>(co) * C + ci) * ksize * ksize);
      for (int ky = 0; ky < ksize; ++ky) {
        int oy0 = std::max(0, pad - ky), oy1 = std::min(H, H + pad - ky);
        for (int kx = 0; kx < ksize; ++kx) {
          double wv = wp[ky * ksize + kx];
          if (wv == 0.0) continue;
          int ox0 = std::max(0, pad - kx), ox1 = std::min(W, W + pad - kx);
          for (int oy = oy0; oy < oy1; ++oy) {
            const double* irow = &in.v[(static_cast<std::size_t>(ci) * H + (oy + ky - pad)) * W];
            double* orow = &out.v[(static_cast<std::size_t>(co) * H + oy) * W];
            for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[ox + kx - pad];
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& in, const Tensor& dout, const double* w, int out_ch, int ksize,
                     Tensor* din, double* dw, double* db) {
  const int pad = ksize / 2;
  const int H = in.h, W = in.w, C = in.c;
  if (dout.c != out_ch || dout.h != H || dout.w != W)
    throw std::invalid_argument("conv2d_backward: dout shape mismatch");

  for (int co = 0; co < out_ch; ++co) {
    if (db) {
      double acc = 0.0;
      const double* dorow = &dout.v[static_cast<std::size_t>(co) * H * W];
      for (int i = 0; i < H * W; ++i) acc += dorow[i];
      db[co] += acc;
    }
    for (int ci = 0; ci < C; ++ci) {
      const double* wp = w + ((static_cast<std::size_t>(co) * C + ci) * ksize * ksize);
      double* dwp = dw ? dw + ((static_cast<std::size_t>(co) * C + ci) * ksize * ksize) : nullptr;
      for (int ky = 0; ky < ksize; ++ky) {
        int oy0 = std::max(0, pad - ky), oy1 = std::min(H, H + pad - ky);
        for (int kx = 0; kx < ksize; ++kx) {
          int ox0 = std::max(0, pad - kx), ox1 = std::min(W, W + pad - kx);
          double wgrad = 0.0;
          double wv = wp[ky * ksize + kx];
          for (int oy = oy0; oy < oy1; ++oy) {
            const double* irow = &in.v[(static_cast<std::size_t>(ci) * H + (oy + ky - pad)) * W];
            const double* dorow = &dout.v[(static_cast<std::size_t>(co) * H + oy) * W];
            if (din) {
              double* dirow = &din->v[(static_cast<std::size_t>(ci) * H + (oy + ky - pad)) * W];
              for (int ox = ox0; ox < ox1; ++ox) {
                wgrad += irow[ox + kx - pad] * dorow[ox];
                dirow[ox + kx - pad] += wv * dorow[ox];
              }
            } else {
              for (int ox = ox0; ox < ox1; ++ox) wgrad += irow[ox + kx - pad] * dorow[ox];
            }
          }
          if (dwp) dwp[ky * ksize + kx] += wgrad;
        }
      }
    }
  }
}

Tensor avgpool2_forward(const Tensor& in) {
  if (in.h % 2 != 0 || in.w % 2 != 0)
    throw std::invalid_argument("avgpool2_forward: dims must be even");
  Tensor out(in.c, in.h / 2, in.w / 2);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x)
        out.at(c, y, x) = 0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                                  in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1));
  return out;
}

void avgpool2_backward(const Tensor& dout, Tensor& din) {
  for (int c = 0; c < dout.c; ++c)
    for (int y = 0; y < dout.h; ++y)
      for (int x = 0; x < dout.w; ++x) {
        double g = 0.25 * dout.at(c, y, x);
        din.at(c, 2 * y, 2 * x) += g;
        din.at(c, 2 * y, 2 * x + 1) += g;
        din.at(c, 2 * y + 1, 2 * x) += g;
        din.at(c, 2 * y + 1, 2 * x + 1) += g;
      }
}

Tensor upsample2_forward(const Tensor& in) {
  Tensor out(in.c, in.h * 2, in.w * 2);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        double v = in.at(c, y, x);
        out.at(c, 2 * y, 2 * x) = v;
        out.at(c, 2 * y, 2 * x + 1) = v;
        out.at(c, 2 * y + 1, 2 * x) = v;
        out.at(c, 2 * y + 1, 2 * x + 1) = v;
      }
  return out;
}

void upsample2_backward(const Tensor& dout, Tensor& din) {
  for (int c = 0; c < din.c; ++c)
    for (int y = 0; y < din.h; ++y)
      for (int x = 0; x < din.w; ++x)
        din.at(c, y, x) += dout.at(c, 2 * y, 2 * x) + dout.at(c, 2 * y, 2 * x + 1) +
                           dout.at(c, 2 * y + 1, 2 * x) + dout.at(c, 2 * y + 1, 2 * x + 1);
}

void init_conv_params(double* w, double* bias, int in_ch, int out_ch, int ksize,
                      std::uint64_t key) {
  CounterRng rng(key);
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * ksize * ksize));
  const std::size_t n = static_cast<std::size_t>(out_ch) * in_ch * ksize * ksize;
  for (std::size_t i = 0; i < n; ++i) w[i] = stddev * rng.next_gauss();
  if (bias)
    for (int i = 0; i < out_ch; ++i) bias[i] = 0.0;
}

void sgd_step(std::vector<double>& params, std::vector<double>& grads, double lr,
              double clip_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  double norm = std::sqrt(sq);
  double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * scale * grads[i];
}

}  // namespace qp::nn
