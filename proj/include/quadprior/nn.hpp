#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "quadprior/image.hpp"

namespace qp::nn {

// Planar double tensor [c][h][w]; all net arithmetic runs in 64-bit.
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, double fill = 0.0)
      : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

  double& at(int ci, int y, int x) {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }
  double at(int ci, int y, int x) const {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }
  std::size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

Tensor from_image(const ImageF& img);
ImageF to_image(const Tensor& t);

// Smooth leaky rectifier: slope LEAK for x << 0, 1 for x >> 0, C-infinity at
// the elbow so finite-difference gradient audits hold at h = 1e-3 (a hard kink
// would be crossed by the probe and break them; sharper elbows push the FD
// truncation term past the audit tolerance).
constexpr double ACT_LEAK = 0.1;
constexpr double ACT_SHARPNESS = 6.0;
double act(double x);
double act_deriv(double x);

Tensor act_forward(const Tensor& in);
// din += act'(pre) * dout
void act_backward(const Tensor& pre, const Tensor& dout, Tensor& din);

// ksize x ksize convolution, stride 1, zero padding ksize/2. Weights are laid
// out [out_ch][in_ch][ky][kx] followed by out_ch biases when bias != nullptr.
Tensor conv2d_forward(const Tensor& in, const double* w, const double* bias, int out_ch,
                      int ksize);
// Accumulates dw/db (when non-null) and din (when non-null).
void conv2d_backward(const Tensor& in, const Tensor& dout, const double* w, int out_ch, int ksize,
                     Tensor* din, double* dw, double* db);

// 2x2 average pooling (dims must be even).
Tensor avgpool2_forward(const Tensor& in);
void avgpool2_backward(const Tensor& dout, Tensor& din);

// Nearest-neighbour 2x upsampling.
Tensor upsample2_forward(const Tensor& in);
void upsample2_backward(const Tensor& dout, Tensor& din);

// He-style init: w ~ N(0, sqrt(2 / fan_in)), biases 0. Deterministic per key.
void init_conv_params(double* w, double* bias, int in_ch, int out_ch, int ksize,
                      std::uint64_t key);

// L2-norm clip followed by a plain SGD step.
void sgd_step(std::vector<double>& params, std::vector<double>& grads, double lr,
              double clip_norm);

}  // namespace qp::nn
