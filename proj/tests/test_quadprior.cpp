#include <cmath>
#include <cstdlib>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "quadprior/color_model.hpp"
#include "quadprior/errors.hpp"
#include "quadprior/synth.hpp"
#include "quadprior/tensor_io.hpp"

using namespace qp;

namespace {

GaussianColorFields fields_from_constants(int w, int h, float e, float el, float ell, float ex = 0,
                                          float ey = 0) {
  GaussianColorFields f;
  f.E = ImageF(w, h, 1, e);
  f.E_lambda = ImageF(w, h, 1, el);
  f.E_lambdalambda = ImageF(w, h, 1, ell);
  f.Ex = ImageF(w, h, 1, ex);
  f.Ey = ImageF(w, h, 1, ey);
  return f;
}

ImageF apply_gamma(const ImageF& img, double gamma) {
  ImageF out = img;
  for (float& v : out.data) v = static_cast<float>(std::pow(static_cast<double>(v), gamma));
  return out;
}

// Golden-file check; set QP_UPDATE_GOLDENS=1 to refresh from the current build.
void check_golden(const ImageF& img, const std::string& name, double tol) {
  std::string path = std::string(QP_GOLDEN_DIR) + "/" + name;
  if (std::getenv("QP_UPDATE_GOLDENS")) save_qpt(img, path);
  ImageF want = load_qpt(path);
  REQUIRE(want.same_shape(img));
  CHECK(oracle::max_abs_diff(img, want) <= tol);
}

}  // namespace

TEST_CASE("identity map on a constant image") {
  ColorModel cm;
  cm.W = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  ImageF img(10, 8, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) {
      img.at(x, y, 0) = 0.7f;
      img.at(x, y, 1) = 0.4f;
      img.at(x, y, 2) = 0.2f;
    }
  GaussianColorFields f = apply_color_model(img, cm);
  for (std::size_t i = 0; i < f.E.data.size(); ++i) {
    CHECK(f.E.data[i] == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(f.E_lambda.data[i] == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(f.E_lambdalambda.data[i] == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(std::abs(f.Ex.data[i]) < 1e-6);
    CHECK(std::abs(f.Ey.data[i]) < 1e-6);
  }
}

TEST_CASE("default matrix on white") {
  ColorModel cm;
  ImageF img(6, 6, 3, 1.0f);
  GaussianColorFields f = apply_color_model(img, cm);
  for (float v : f.E.data) CHECK(v == doctest::Approx(0.96).epsilon(1e-6));
}

TEST_CASE("fields are linear in the image") {
  ColorModel cm;
  ImageF img = synth_image(24, 24, 5);
  GaussianColorFields f1 = apply_color_model(img, cm);
  GaussianColorFields f2 = apply_color_model(scaled(img, 2.0), cm);
  CHECK(oracle::rms_diff(scaled(f1.E, 2.0), f2.E) < 1e-6);
  CHECK(oracle::rms_diff(scaled(f1.E_lambda, 2.0), f2.E_lambda) < 1e-6);
  CHECK(oracle::rms_diff(scaled(f1.E_lambdalambda, 2.0), f2.E_lambdalambda) < 1e-6);
  CHECK(oracle::rms_diff(scaled(f1.Ex, 2.0), f2.Ex) < 1e-6);
  CHECK(oracle::rms_diff(scaled(f1.Ey, 2.0), f2.Ey) < 1e-6);
}

TEST_CASE("apply_color_model rejects non-RGB input") {
  ColorModel cm;
  ImageF gray(4, 4, 1, 0.5f);
  CHECK_THROWS_AS(apply_color_model(gray, cm), std::invalid_argument);
}

TEST_CASE("H analytic cases") {
  auto f1 = fields_from_constants(4, 4, 1.0f, 0.0f, 0.5f);
  ImageF h1 = compute_H(f1, 1e-10);
  for (float v : h1.data) CHECK(v == 0.0f);

  auto f2 = fields_from_constants(4, 4, 1.0f, 1.0f, 1.0f);
  ImageF h2 = compute_H(f2, 1e-10);
  for (float v : h2.data) CHECK(v == doctest::Approx(std::numbers::pi / 4).epsilon(1e-7));
}

TEST_CASE("H is invariant to global gain") {
  ColorModel cm;
  ImageF img = synth_image(32, 32, 6);  // fixture with healthy (El, Ell) magnitudes
  ImageF h_ref = compute_H(apply_color_model(img, cm), cm.eps);
  for (double k : {0.25, 0.5, 2.0}) {
    ImageF h_k = compute_H(apply_color_model(scaled(img, k), cm), cm.eps);
    CHECK(oracle::rms_diff(h_ref, h_k) < 1e-5);
  }
}

TEST_CASE("C analytic cases") {
  auto f1 = fields_from_constants(3, 3, 5.0f, 3.0f, 4.0f);
  for (float v : compute_C(f1, 1e-10).data) CHECK(std::abs(v) < 1e-6);  // log(25/25)

  auto f2 = fields_from_constants(3, 3, 1.0f, 1.0f, 1.0f);
  for (float v : compute_C(f2, 1e-10).data)
    CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-7));
}

TEST_CASE("C is invariant to global gain on the valid mask") {
  ColorModel cm;
  ImageF img = synth_image(32, 32, 6);
  GaussianColorFields f_ref = apply_color_model(img, cm);
  ImageF c_ref = compute_C(f_ref, cm.eps);
  ImageF mask(img.width, img.height, 1);
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    double e = f_ref.E.data[i];
    mask.data[i] = (e * e > 100.0 * cm.eps) ? 1.0f : 0.0f;
  }
  ImageF c_k = compute_C(apply_color_model(scaled(img, 0.3), cm), cm.eps);
  CHECK(masked_rms_diff(c_ref, c_k, mask) < 1e-4);
}

TEST_CASE("W map of a constant image is zero") {
  ColorModel cm;
  ImageF img(16, 16, 3, 0.8f);
  GaussianColorFields f = apply_color_model(img, cm);
  for (float v : compute_Wmap(f, cm.eps, cm.arg_clamp).data) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("W map matches a per-pixel arithmetic oracle on a ramp") {
  ColorModel cm;  // default matrix, sigma 1
  ImageF img(8, 8, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      img.at(x, y, 0) = static_cast<float>(0.2 + 0.08 * x);
      img.at(x, y, 1) = static_cast<float>(0.3 + 0.05 * y);
      img.at(x, y, 2) = static_cast<float>(0.25 + 0.03 * x + 0.02 * y);
    }

  // Oracle: replay matrix, brute-force smoothing/derivatives, ratio, tan.
  ImageF ehat(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      ehat.at(x, y, 0) = static_cast<float>(cm.W[0][0] * img.at(x, y, 0) +
                                            cm.W[0][1] * img.at(x, y, 1) +
                                            cm.W[0][2] * img.at(x, y, 2));
  Kernel1D g0 = gaussian_kernel(cm.sigma, 0);
  Kernel1D g1 = gaussian_kernel(cm.sigma, 1);
  ImageF e = oracle::conv2d_bruteforce(ehat, g0, g0);
  ImageF ex = oracle::conv2d_bruteforce(ehat, g1, g0);
  ImageF ey = oracle::conv2d_bruteforce(ehat, g0, g1);
  ImageF want(8, 8, 1);
  for (std::size_t i = 0; i < want.data.size(); ++i) {
    double a = std::sqrt(static_cast<double>(ex.data[i]) * ex.data[i] +
                         static_cast<double>(ey.data[i]) * ey.data[i]) /
               (std::abs(static_cast<double>(e.data[i])) + cm.eps);
    want.data[i] = static_cast<float>(std::tan(std::min(a, cm.arg_clamp)));
  }

  GaussianColorFields f = apply_color_model(img, cm);
  ImageF got = compute_Wmap(f, cm.eps, cm.arg_clamp);
  CHECK(oracle::max_abs_diff(got, want) < 1e-5);
}

TEST_CASE("W map is invariant to global gain on the valid mask") {
  ColorModel cm;
  ImageF img = synth_image(32, 32, 6);
  GaussianColorFields f_ref = apply_color_model(img, cm);
  ImageF w_ref = compute_Wmap(f_ref, cm.eps, cm.arg_clamp);
  ImageF mask(img.width, img.height, 1);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    mask.data[i] = (std::abs(f_ref.E.data[i]) > 100.0 * cm.eps) ? 1.0f : 0.0f;
  ImageF w_k = compute_Wmap(apply_color_model(scaled(img, 4.0), cm), cm.eps, cm.arg_clamp);
  CHECK(masked_rms_diff(w_ref, w_k, mask) < 1e-4);
}

TEST_CASE("O ranks strict orders and ties") {
  ImageF img(3, 1, 3);
  img.at(0, 0, 0) = 0.9f; img.at(0, 0, 1) = 0.5f; img.at(0, 0, 2) = 0.1f;  // strict
  img.at(1, 0, 0) = 0.5f; img.at(1, 0, 1) = 0.5f; img.at(1, 0, 2) = 0.5f;  // full tie
  img.at(2, 0, 0) = 0.8f; img.at(2, 0, 1) = 0.8f; img.at(2, 0, 2) = 0.2f;  // two-way top tie

  ImageF o = compute_O(img);
  CHECK(o.at(0, 0, 0) == 1.0f);
  CHECK(o.at(0, 0, 1) == 0.0f);
  CHECK(o.at(0, 0, 2) == -1.0f);

  CHECK(o.at(1, 0, 0) == 0.0f);
  CHECK(o.at(1, 0, 1) == 0.0f);
  CHECK(o.at(1, 0, 2) == 0.0f);

  CHECK(o.at(2, 0, 0) == 0.5f);
  CHECK(o.at(2, 0, 1) == 0.5f);
  CHECK(o.at(2, 0, 2) == -1.0f);

  // channel sum is zero under any tie pattern
  for (int x = 0; x < 3; ++x)
    CHECK(o.at(x, 0, 0) + o.at(x, 0, 1) + o.at(x, 0, 2) == doctest::Approx(0.0));
}

TEST_CASE("O is gamma-invariant at tie-free pixels") {
  ImageF img = synth_image(32, 32, 6);
  ImageF o_ref = compute_O(img);
  for (double gamma : {0.4, 0.5, 2.2}) {
    ImageF o_g = compute_O(apply_gamma(img, gamma));
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        if (!tie_free_pixel(img, x, y)) continue;
        for (int c = 0; c < 3; ++c) CHECK(o_g.at(x, y, c) == o_ref.at(x, y, c));
      }
  }
}

TEST_CASE("extract_prior is deterministic") {
  ColorModel cm;
  ImageF img = synth_image(24, 24, 9);
  SUBCASE("without noise") {
    QuadPrior a = extract_prior(img, cm);
    QuadPrior b = extract_prior(img, cm);
    CHECK(a.stacked().data == b.stacked().data);
  }
  SUBCASE("with seeded noise") {
    NoiseSpec noise{0.02, 300.0, 77};
    QuadPrior a = extract_prior(img, cm, noise);
    QuadPrior b = extract_prior(img, cm, noise);
    CHECK(a.stacked().data == b.stacked().data);
  }
}

TEST_CASE("prior is stable under global dimming") {
  ColorModel cm;
  ImageF img = synth_image(32, 32, 6);
  ImageF dim = scaled(img, 0.5);

  GaussianColorFields f_ref = apply_color_model(img, cm);
  ImageF mask = invariance_mask(f_ref);
  QuadPrior p_ref = extract_prior(img, cm);
  QuadPrior p_dim = extract_prior(dim, cm);

  CHECK(masked_rms_diff(p_ref.H, p_dim.H, mask) < 1e-4);
  CHECK(masked_rms_diff(p_ref.C, p_dim.C, mask) < 1e-4);
  CHECK(masked_rms_diff(p_ref.Wmap, p_dim.Wmap, mask) < 1e-4);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (!tie_free_pixel(img, x, y, 1e-5f)) continue;
      for (int c = 0; c < 3; ++c) CHECK(p_dim.O.at(x, y, c) == p_ref.O.at(x, y, c));
    }
}

TEST_CASE("prior golden dump on the 16x16 fixture") {
  ColorModel cm;
  ImageF img = synth_image(16, 16, 16);
  ImageF stacked = extract_prior(img, cm).stacked();
  REQUIRE(stacked.channels == 6);
  CHECK(stacked.all_finite());
  check_golden(stacked, "prior_16x16.qpt", 2e-6);
}

TEST_CASE("prior channels stay finite on degenerate inputs") {
  ColorModel cm;
  ImageF black(12, 12, 3, 0.0f);
  ImageF white(12, 12, 3, 1.0f);
  ImageF hot(12, 12, 3, 0.0f);
  hot.at(6, 6, 0) = hot.at(6, 6, 1) = hot.at(6, 6, 2) = 1.0f;
  for (const ImageF* img : {&black, &white, &hot}) {
    ImageF p = extract_prior(*img, cm).stacked();
    CHECK(p.all_finite());
  }
}

TEST_CASE("permuting matrix rows permutes the mapped channels") {
  ColorModel cm;
  ImageF img = synth_image(16, 16, 3);
  GaussianColorFields f = apply_color_model(img, cm);

  ColorModel swapped = cm;
  std::swap(swapped.W[0], swapped.W[1]);
  GaussianColorFields g = apply_color_model(img, swapped);
  CHECK(g.E.data == f.E_lambda.data);  // row swap swaps the output fields
  CHECK(g.E_lambda.data == f.E.data);
  CHECK(g.E_lambdalambda.data == f.E_lambdalambda.data);
}

TEST_CASE("color model json round trip and validation") {
  ColorModel cm;
  cm.sigma = 1.7;
  cm.eps = 1e-9;
  ColorModel back = ColorModel::from_json(cm.to_json());
  CHECK(back.sigma == doctest::Approx(1.7));
  CHECK(back.eps == doctest::Approx(1e-9));
  CHECK(back.W == cm.W);

  ColorModel bad = cm;
  bad.W = {{{1, 2, 3}, {2, 4, 6}, {3, 6, 9}}};  // singular
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cm;
  bad.sigma = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("fd gradient of a constant loss is zero") {
  ColorModel cm;
  auto grad = colormodel_fd_grad([](const ColorModel&) { return 3.5; }, cm, 1e-3);
  for (double g : grad) CHECK(g == doctest::Approx(0.0));
}

TEST_CASE("fd gradient of a quadratic is analytic") {
  ColorModel cm;
  cm.W[0][0] = 3.0;
  auto grad =
      colormodel_fd_grad([](const ColorModel& m) { return m.W[0][0] * m.W[0][0]; }, cm, 1e-3);
  CHECK(grad[0] == doctest::Approx(6.0).epsilon(1e-6));  // central diff exact on quadratics
  for (int i = 1; i < 10; ++i) CHECK(grad[i] == doctest::Approx(0.0));
}

TEST_CASE("fd gradient agrees with a step-halving oracle") {
  // sigma = 1.1 keeps ceil(3*sigma) constant within +-h of every probe, so the
  // loss stays smooth in all 10 coordinates. The fixture keeps every pixel
  // clear of the atan2 branch cut (|E_lambda| > 0.02 wherever E_ll < 0), so
  // summing H is smooth under the probes too.
  ColorModel cm;
  cm.sigma = 1.1;
  ImageF img = synth_image(16, 16, 25);
  auto loss = [&img](const ColorModel& m) {
    ImageF h = compute_H(apply_color_model(img, m), m.eps);
    double s = 0.0;
    for (float v : h.data) s += v;
    return s;
  };
  auto g_h = colormodel_fd_grad(loss, cm, 1e-3);
  auto g_h2 = colormodel_fd_grad(loss, cm, 5e-4);
  for (int i = 0; i < 10; ++i) {
    double denom = std::max({std::abs(g_h[i]), std::abs(g_h2[i]), 1e-6});
    CHECK(std::abs(g_h[i] - g_h2[i]) / denom < 0.01);
  }
}

TEST_CASE("fd gradient propagates non-finite losses") {
  ColorModel cm;
  auto loss = [](const ColorModel&) { return std::nan(""); };
  CHECK_THROWS_AS(colormodel_fd_grad(loss, cm, 1e-3), numeric_error);
}
