#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>

#include "quadprior/distortion.hpp"
#include "quadprior/image.hpp"

namespace qp {

// Linear RGB -> (E, E_lambda, E_lambdalambda) map plus the Gaussian scale used
// for spatial smoothing/derivatives. The matrix defaults to the standard
// Gaussian color model coefficients and is exposed for learning.
struct ColorModel {
  std::array<std::array<double, 3>, 3> W{{{0.06, 0.63, 0.27},
                                          {0.30, 0.04, -0.35},
                                          {0.34, -0.60, 0.17}}};
  double sigma = 1.0;      // smoothing / derivative scale in pixels
  double eps = 1e-10;      // stabilizer for divisions and logs
  double arg_clamp = 1.5;  // tan() argument clamp, must stay below pi/2

  void validate() const;  // throws std::invalid_argument on violation

  std::string to_json() const;
  static ColorModel from_json(const std::string& text);
};

// Smoothed spectral-energy fields at the model's scale: E and its wavelength
// derivatives, plus spatial derivatives of E.
struct GaussianColorFields {
  ImageF E, E_lambda, E_lambdalambda;  // order-0 smoothed
  ImageF Ex, Ey;                       // spatial derivative of E (x / y)
};

// The stacked invariant maps. Channel order in the 6-channel raster:
// H, C, W, O_R, O_G, O_B.
struct QuadPrior {
  ImageF H;     // radians in [-pi, pi]
  ImageF C;     // log-domain chroma-like ratio
  ImageF Wmap;  // >= 0, intensity-normalized edge strength
  ImageF O;     // 3 channels in {-1,...,+1}, per-pixel ranks summing to 0

  ImageF stacked() const;
};

// Per pixel (E,El,Ell) = W*(R,G,B); then Gaussian smoothing / x,y derivative
// filtering at scale sigma. img must have 3 channels.
GaussianColorFields apply_color_model(const ImageF& img, const ColorModel& cm);

// H = atan2(E_lambda, E_lambdalambda). Total, no stabilizer needed.
ImageF compute_H(const GaussianColorFields& f, double eps);

// C = log((El^2 + Ell^2 + eps) / (E^2 + eps)).
ImageF compute_C(const GaussianColorFields& f, double eps);

// W = tan(min(sqrt(Ex^2+Ey^2) / (|E| + eps), arg_clamp)).
ImageF compute_Wmap(const GaussianColorFields& f, double eps, double arg_clamp);

// Competition-average ranks of (R,G,B) per pixel, mapped {0,1,2} -> {-1,0,+1};
// exact-equality ties share the average of their tied ranks.
ImageF compute_O(const ImageF& img);

// Full pipeline: optional Gaussian-Poisson corruption of a working copy, then
// fields -> H/C/W/O.
QuadPrior extract_prior(const ImageF& img, const ColorModel& cm,
                        const std::optional<NoiseSpec>& noise = std::nullopt);

// Central finite differences of a scalar loss over the 9 matrix entries plus
// sigma (10 values, row-major matrix order then sigma).
std::array<double, 10> colormodel_fd_grad(const std::function<double(const ColorModel&)>& loss_fn,
                                          const ColorModel& cm, double h);

// 1 where the invariance comparison is numerically meaningful: E^2 and
// (E_lambda^2 + E_lambdalambda^2) both above their floors. Near-black pixels
// and joint zero-crossings of the wavelength derivatives are excluded; there
// the eps stabilizer and float rounding dominate any illumination effect.
ImageF invariance_mask(const GaussianColorFields& f, double e2_min = 1e-3, double n2_min = 1e-3);

// True when no two channels are within `margin` of each other at (x, y).
bool tie_free_pixel(const ImageF& img, int x, int y, float margin = 0.0f);

}  // namespace qp
