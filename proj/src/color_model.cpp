#include "quadprior/color_model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "quadprior/errors.hpp"
#include "quadprior/kernel.hpp"

namespace qp {

using nlohmann::json;

namespace {
double det3(const std::array<std::array<double, 3>, 3>& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}
}  // namespace

void ColorModel::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("ColorModel: sigma must be > 0");
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw std::invalid_argument("ColorModel: eps must be > 0");
  if (!(arg_clamp > 0.0) || !(arg_clamp < 1.5707963267948966))
    throw std::invalid_argument("ColorModel: arg_clamp must be in (0, pi/2)");
  for (const auto& row : W)
    for (double v : row)
      if (!std::isfinite(v)) throw std::invalid_argument("ColorModel: non-finite matrix entry");
  if (std::abs(det3(W)) <= 1e-6)
    throw std::invalid_argument("ColorModel: matrix is singular (|det| <= 1e-6)");
}

std::string ColorModel::to_json() const {
  json j;
  j["W"] = {{W[0][0], W[0][1], W[0][2]},
            {W[1][0], W[1][1], W[1][2]},
            {W[2][0], W[2][1], W[2][2]}};
  j["sigma"] = sigma;
  j["eps"] = eps;
  j["arg_clamp"] = arg_clamp;
  return j.dump();
}

ColorModel ColorModel::from_json(const std::string& text) {
  json j = json::parse(text);
  ColorModel cm;
  if (j.contains("W")) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cm.W[r][c] = j["W"].at(r).at(c).get<double>();
  }
  cm.sigma = j.value("sigma", cm.sigma);
  cm.eps = j.value("eps", cm.eps);
  cm.arg_clamp = j.value("arg_clamp", cm.arg_clamp);
  cm.validate();
  return cm;
}

ImageF QuadPrior::stacked() const {
  return concat_channels({&H, &C, &Wmap, &O});
}

GaussianColorFields apply_color_model(const ImageF& img, const ColorModel& cm) {
  cm.validate();
  if (img.channels != 3)
    throw std::invalid_argument("apply_color_model: image must have 3 channels");

  const int w = img.width, h = img.height;
  ImageF ehat(w, h, 1), ehat_l(w, h, 1), ehat_ll(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double r = img.at(x, y, 0), g = img.at(x, y, 1), b = img.at(x, y, 2);
      ehat.at(x, y, 0) = static_cast<float>(cm.W[0][0] * r + cm.W[0][1] * g + cm.W[0][2] * b);
      ehat_l.at(x, y, 0) = static_cast<float>(cm.W[1][0] * r + cm.W[1][1] * g + cm.W[1][2] * b);
      ehat_ll.at(x, y, 0) = static_cast<float>(cm.W[2][0] * r + cm.W[2][1] * g + cm.W[2][2] * b);
    }

  Kernel1D g0 = gaussian_kernel(cm.sigma, 0);
  Kernel1D g1 = gaussian_kernel(cm.sigma, 1);

  GaussianColorFields f;
  f.E = conv_separable(ehat, g0, g0);
  f.Ex = conv_separable(ehat, g1, g0);
  f.Ey = conv_separable(ehat, g0, g1);
  f.E_lambda = conv_separable(ehat_l, g0, g0);
  f.E_lambdalambda = conv_separable(ehat_ll, g0, g0);
  return f;
}

ImageF compute_H(const GaussianColorFields& f, double /*eps*/) {
  ImageF out(f.E.width, f.E.height, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<float>(std::atan2(static_cast<double>(f.E_lambda.data[i]),
                                                static_cast<double>(f.E_lambdalambda.data[i])));
  return out;
}

ImageF compute_C(const GaussianColorFields& f, double eps) {
  ImageF out(f.E.width, f.E.height, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double el = f.E_lambda.data[i], ell = f.E_lambdalambda.data[i], e = f.E.data[i];
    out.data[i] = static_cast<float>(std::log((el * el + ell * ell + eps) / (e * e + eps)));
  }
  return out;
}

ImageF compute_Wmap(const GaussianColorFields& f, double eps, double arg_clamp) {
  ImageF out(f.E.width, f.E.height, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double gx = f.Ex.data[i], gy = f.Ey.data[i], e = f.E.data[i];
    double a = std::sqrt(gx * gx + gy * gy) / (std::abs(e) + eps);
    out.data[i] = static_cast<float>(std::tan(std::min(a, arg_clamp)));
  }
  return out;
}

ImageF compute_O(const ImageF& img) {
  if (img.channels != 3) throw std::invalid_argument("compute_O: image must have 3 channels");
  ImageF out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float v[3] = {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
      for (int c = 0; c < 3; ++c) {
        // Competition-average rank: #smaller + (#equal-1)/2, then {0,1,2} -> {-1,0,+1}.
        int smaller = 0, equal = 0;
        for (int o = 0; o < 3; ++o) {
          if (v[o] < v[c]) ++smaller;
          if (v[o] == v[c]) ++equal;
        }
        double rank = smaller + 0.5 * (equal - 1);
        out.at(x, y, c) = static_cast<float>(rank - 1.0);
      }
    }
  return out;
}

QuadPrior extract_prior(const ImageF& img, const ColorModel& cm,
                        const std::optional<NoiseSpec>& noise) {
  const ImageF& src = img;
  ImageF corrupted;
  if (noise) corrupted = add_gauss_poisson(img, *noise);
  const ImageF& work = noise ? corrupted : src;

  GaussianColorFields f = apply_color_model(work, cm);
  QuadPrior p;
  p.H = compute_H(f, cm.eps);
  p.C = compute_C(f, cm.eps);
  p.Wmap = compute_Wmap(f, cm.eps, cm.arg_clamp);
  p.O = compute_O(work);
  return p;
}

ImageF invariance_mask(const GaussianColorFields& f, double e2_min, double n2_min) {
  ImageF mask(f.E.width, f.E.height, 1);
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    double e = f.E.data[i], el = f.E_lambda.data[i], ell = f.E_lambdalambda.data[i];
    mask.data[i] = (e * e > e2_min && el * el + ell * ell > n2_min) ? 1.0f : 0.0f;
  }
  return mask;
}

bool tie_free_pixel(const ImageF& img, int x, int y, float margin) {
  float r = img.at(x, y, 0), g = img.at(x, y, 1), b = img.at(x, y, 2);
  return std::abs(r - g) > margin && std::abs(g - b) > margin && std::abs(r - b) > margin;
}

std::array<double, 10> colormodel_fd_grad(const std::function<double(const ColorModel&)>& loss_fn,
                                          const ColorModel& cm, double h) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw std::invalid_argument("colormodel_fd_grad: h must be > 0");

  auto eval = [&](const ColorModel& m) {
    double v = loss_fn(m);
    if (!std::isfinite(v)) throw numeric_error("colormodel_fd_grad: loss_fn returned non-finite");
    return v;
  };

  std::array<double, 10> grad{};
  for (int i = 0; i < 9; ++i) {
    ColorModel up = cm, dn = cm;
    up.W[i / 3][i % 3] += h;
    dn.W[i / 3][i % 3] -= h;
    grad[i] = (eval(up) - eval(dn)) / (2.0 * h);
  }
  ColorModel up = cm, dn = cm;
  up.sigma += h;
  dn.sigma -= h;
  grad[9] = (eval(up) - eval(dn)) / (2.0 * h);
  return grad;
}

}  // namespace qp
