#include "quadprior/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "quadprior/kernel.hpp"
#include "quadprior/rng.hpp"

namespace qp {

using nlohmann::json;

void NoiseSpec::validate() const {
  if (!(gauss_sigma >= 0.0) || !std::isfinite(gauss_sigma))
    throw std::invalid_argument("NoiseSpec: gauss_sigma must be >= 0");
  if (!(poisson_peak > 0.0) || !std::isfinite(poisson_peak))
    throw std::invalid_argument("NoiseSpec: poisson_peak must be > 0");
}

std::string NoiseSpec::to_json() const {
  json j{{"gauss_sigma", gauss_sigma}, {"poisson_peak", poisson_peak}, {"seed", seed}};
  return j.dump();
}

NoiseSpec NoiseSpec::from_json(const std::string& text) {
  json j = json::parse(text);
  NoiseSpec s;
  s.gauss_sigma = j.value("gauss_sigma", s.gauss_sigma);
  s.poisson_peak = j.value("poisson_peak", s.poisson_peak);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

void IlluminationSpec::validate() const {
  if (!(gain > 0.0) || !std::isfinite(gain))
    throw std::invalid_argument("IlluminationSpec: gain must be > 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("IlluminationSpec: gamma must be > 0");
  if (!(field_sigma >= 0.0) || !std::isfinite(field_sigma))
    throw std::invalid_argument("IlluminationSpec: field_sigma must be >= 0");
  if (!(field_lo > 0.0) || !(field_hi >= field_lo))
    throw std::invalid_argument("IlluminationSpec: need 0 < field_lo <= field_hi");
}

std::string IlluminationSpec::to_json() const {
  json j{{"gain", gain},
         {"gamma", gamma},
         {"field_sigma", field_sigma},
         {"field_range", {field_lo, field_hi}},
         {"seed", seed}};
  return j.dump();
}

IlluminationSpec IlluminationSpec::from_json(const std::string& text) {
  json j = json::parse(text);
  IlluminationSpec s;
  s.gain = j.value("gain", s.gain);
  s.gamma = j.value("gamma", s.gamma);
  s.field_sigma = j.value("field_sigma", s.field_sigma);
  if (j.contains("field_range")) {
    s.field_lo = j["field_range"].at(0).get<double>();
    s.field_hi = j["field_range"].at(1).get<double>();
  }
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

ImageF illumination_field(int width, int height, const IlluminationSpec& spec) {
  spec.validate();
  ImageF field(width, height, 1, 1.0f);
  if (spec.field_sigma <= 0.0) return field;

  const std::uint64_t base = derive_seed(spec.seed, "illum_field");
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      CounterRng rng(derive_seed(base, "px", static_cast<std::uint64_t>(y) * width + x));
      field.at(x, y, 0) =
          static_cast<float>(spec.field_lo + (spec.field_hi - spec.field_lo) * rng.next_unit());
    }
  Kernel1D g = gaussian_kernel(spec.field_sigma, 0);
  return conv_separable(field, g, g);
}

ImageF apply_illumination(const ImageF& img, const IlluminationSpec& spec) {
  spec.validate();
  if (img.empty()) throw std::invalid_argument("apply_illumination: empty image");

  // Exact identity when nothing is asked for; avoids pow() rounding.
  if (spec.gain == 1.0 && spec.gamma == 1.0 && spec.field_sigma <= 0.0) return img;

  ImageF field = illumination_field(img.width, img.height, spec);
  ImageF out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double f = spec.gain * field.at(x, y, 0);
      for (int c = 0; c < img.channels; ++c) {
        double v = std::max(0.0, f * img.at(x, y, c));
        if (spec.gamma != 1.0) v = std::pow(v, spec.gamma);
        out.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return out;
}

ImageF add_gauss_poisson(const ImageF& img, const NoiseSpec& spec) {
  spec.validate();
  if (img.empty()) throw std::invalid_argument("add_gauss_poisson: empty image");

  const std::uint64_t base = derive_seed(spec.seed, "gauss_poisson");
  ImageF out(img.width, img.height, img.channels);
  const std::size_t n = img.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(derive_seed(base, "px", i));
    double x = std::max(0.0, static_cast<double>(img.data[i]));
    double y = static_cast<double>(rng.next_poisson(x * spec.poisson_peak)) / spec.poisson_peak;
    if (spec.gauss_sigma > 0.0) y += spec.gauss_sigma * rng.next_gauss();
    out.data[i] = static_cast<float>(std::clamp(y, 0.0, 1.0));
  }
  return out;
}

}  // namespace qp
