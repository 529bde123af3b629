#pragma once

#include <cstdint>
#include <string>

#include "quadprior/image.hpp"

namespace qp {

// Gaussian-Poisson compound sensor noise. poisson_peak is the expected photon
// count at pixel value 1.0; higher peak = less shot noise.
struct NoiseSpec {
  double gauss_sigma = 0.01;   // additive Gaussian std-dev in [0,1] units
  double poisson_peak = 200.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static NoiseSpec from_json(const std::string& text);
};

// Multiplicative illumination change: global gain, gamma, and an optional
// smooth spatially varying field in [lo, hi].
struct IlluminationSpec {
  double gain = 1.0;
  double gamma = 1.0;
  double field_sigma = 0.0;  // 0 = no spatial field
  double field_lo = 1.0;
  double field_hi = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static IlluminationSpec from_json(const std::string& text);
};

// y = clamp((gain * F(x,y) * img)^gamma, 0, 1). F is white noise in [lo,hi]
// blurred at field_sigma, or identically 1 when field_sigma == 0.
ImageF apply_illumination(const ImageF& img, const IlluminationSpec& spec);

// y = clamp(Poisson(x*peak)/peak + N(0, gauss_sigma^2), 0, 1). Each pixel has
// its own RNG stream keyed by (seed, pixel index), so results do not depend on
// evaluation order.
ImageF add_gauss_poisson(const ImageF& img, const NoiseSpec& spec);

// The smooth multiplicative field used by apply_illumination, exposed for
// inspection and golden tests.
ImageF illumination_field(int width, int height, const IlluminationSpec& spec);

}  // namespace qp
