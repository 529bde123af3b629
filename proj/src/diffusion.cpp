#include "quadprior/diffusion.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "quadprior/rng.hpp"

namespace qp {

using nlohmann::json;

NoiseSchedule make_linear_schedule(int T, double beta1, double betaT) {
  if (T < 1) throw std::invalid_argument("make_linear_schedule: T must be >= 1");
  if (!(beta1 > 0.0) || !(beta1 <= betaT) || !(betaT < 1.0))
    throw std::invalid_argument("make_linear_schedule: need 0 < beta1 <= betaT < 1");

  NoiseSchedule s;
  s.T = T;
  s.beta1_ = beta1;
  s.betaT_ = betaT;
  s.beta.resize(T);
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    double b = (T == 1) ? beta1 : beta1 + (betaT - beta1) * (static_cast<double>(i) / (T - 1));
    s.beta[i] = b;
    prod *= 1.0 - b;
    s.alpha_bar[i] = prod;
    if (!(prod > 0.0 && prod < 1.0) || (i > 0 && !(s.alpha_bar[i] < s.alpha_bar[i - 1])))
      throw std::invalid_argument("make_linear_schedule: alpha_bar not strictly decreasing in (0,1)");
  }
  return s;
}

std::string NoiseSchedule::to_json() const {
  json j{{"T", T}, {"beta1", beta1_}, {"betaT", betaT_}};
  return j.dump();
}

NoiseSchedule NoiseSchedule::from_json(const std::string& text) {
  json j = json::parse(text);
  return make_linear_schedule(j.at("T").get<int>(), j.at("beta1").get<double>(),
                              j.at("betaT").get<double>());
}

namespace {
void check_t(int t, const NoiseSchedule& sched, const char* who) {
  if (t < 1 || t > sched.T) throw std::invalid_argument(std::string(who) + ": t out of range");
}
void check_shape(const ImageF& a, const ImageF& b, const char* who) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(who) + ": shape mismatch");
}
}  // namespace

ImageF forward_sample(const ImageF& z0, int t, const ImageF& eps, const NoiseSchedule& sched) {
  check_t(t, sched, "forward_sample");
  check_shape(z0, eps, "forward_sample");
  double ab = sched.alpha_bar_at(t);
  return axpby(std::sqrt(ab), z0, std::sqrt(1.0 - ab), eps);
}

ImageF reconstruct_z0(const ImageF& zt, const ImageF& eps_hat, int t, const NoiseSchedule& sched) {
  check_t(t, sched, "reconstruct_z0");
  check_shape(zt, eps_hat, "reconstruct_z0");
  double ab = sched.alpha_bar_at(t);
  double inv = 1.0 / std::sqrt(ab);
  return axpby(inv, zt, -std::sqrt(1.0 - ab) * inv, eps_hat);
}

namespace {
double mse(const ImageF& a, const ImageF& b, const char* who) {
  check_shape(a, b, who);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}
}  // namespace

double loss_noise(const ImageF& eps, const ImageF& eps_hat) { return mse(eps, eps_hat, "loss_noise"); }

double loss_z0(const ImageF& z0, const ImageF& z0_hat) { return mse(z0, z0_hat, "loss_z0"); }

double loss_diff(const ImageF& z0, const ImageF& zt, const ImageF& eps, const ImageF& eps_hat,
                 int t, const NoiseSchedule& sched) {
  return loss_z0(z0, reconstruct_z0(zt, eps_hat, t, sched)) + loss_noise(eps, eps_hat);
}

ImageF ddpm_reverse_step(const ImageF& zt, const ImageF& eps_hat, int t,
                         const NoiseSchedule& sched, const ImageF& noise) {
  check_t(t, sched, "ddpm_reverse_step");
  check_shape(zt, eps_hat, "ddpm_reverse_step");
  double bt = sched.beta_at(t);
  double ab_t = sched.alpha_bar_at(t);
  double inv = 1.0 / std::sqrt(1.0 - bt);
  ImageF mu = axpby(inv, zt, -bt / std::sqrt(1.0 - ab_t) * inv, eps_hat);
  if (t == 1) return mu;

  check_shape(zt, noise, "ddpm_reverse_step");
  double ab_prev = sched.alpha_bar_at(t - 1);
  double sigma = std::sqrt(bt * (1.0 - ab_prev) / (1.0 - ab_t));
  return axpby(1.0, mu, sigma, noise);
}

ImageF gaussian_image(int width, int height, int channels, std::uint64_t seed) {
  ImageF out(width, height, channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    CounterRng rng(derive_seed(seed, "gauss_img", i));
    out.data[i] = static_cast<float>(rng.next_gauss());
  }
  return out;
}

ImageF sample_loop(const Denoiser& denoiser, const ImageF& condition, const NoiseSchedule& sched,
                   std::uint64_t seed, int width, int height, int channels) {
  ImageF z = gaussian_image(width, height, channels, derive_seed(seed, "sample_init"));
  for (int t = sched.T; t >= 1; --t) {
    ImageF eps_hat = denoiser(z, t, condition);
    ImageF noise;
    if (t > 1)
      noise = gaussian_image(width, height, channels,
                             derive_seed(seed, "sample_step", static_cast<std::uint64_t>(t)));
    else
      noise = ImageF(width, height, channels, 0.0f);
    z = ddpm_reverse_step(z, eps_hat, t, sched, noise);
  }
  return z;
}

}  // namespace qp
