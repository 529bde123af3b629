#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "quadprior/image.hpp"

namespace qp {

// Pre-defined beta sequence and its cumulative products alpha_bar. alpha_bar
// is strictly decreasing and lives in (0,1); checked at construction.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;       // length T, index t-1 holds beta_t
  std::vector<double> alpha_bar;  // alpha_bar[t-1] = prod_{s<=t} (1 - beta_s)

  double beta_at(int t) const { return beta.at(t - 1); }
  double alpha_bar_at(int t) const { return alpha_bar.at(t - 1); }

  std::string to_json() const;           // {"T":..,"beta1":..,"betaT":..}
  static NoiseSchedule from_json(const std::string& text);

 private:
  friend NoiseSchedule make_linear_schedule(int T, double beta1, double betaT);
  double beta1_ = 0.0, betaT_ = 0.0;  // kept for serialization
};

NoiseSchedule make_linear_schedule(int T, double beta1, double betaT);

// z_t = sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps.
ImageF forward_sample(const ImageF& z0, int t, const ImageF& eps, const NoiseSchedule& sched);

// z0_hat = (z_t - sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_bar_t).
ImageF reconstruct_z0(const ImageF& zt, const ImageF& eps_hat, int t, const NoiseSchedule& sched);

// Mean-squared error over all elements.
double loss_noise(const ImageF& eps, const ImageF& eps_hat);
double loss_z0(const ImageF& z0, const ImageF& z0_hat);
// Unit-weight sum of the two branches.
double loss_diff(const ImageF& z0, const ImageF& zt, const ImageF& eps, const ImageF& eps_hat,
                 int t, const NoiseSchedule& sched);

// Ancestral DDPM step: mu = (zt - beta_t/sqrt(1-alpha_bar_t) * eps_hat) / sqrt(1-beta_t),
// z_{t-1} = mu + sigma_t * noise with sigma_t^2 = beta_t*(1-alpha_bar_{t-1})/(1-alpha_bar_t).
// At t=1 the noise term is dropped.
ImageF ddpm_reverse_step(const ImageF& zt, const ImageF& eps_hat, int t,
                         const NoiseSchedule& sched, const ImageF& noise);

using Denoiser = std::function<ImageF(const ImageF& zt, int t, const ImageF& condition)>;

// Full reverse chain from seeded unit-Gaussian noise of the given shape.
ImageF sample_loop(const Denoiser& denoiser, const ImageF& condition, const NoiseSchedule& sched,
                   std::uint64_t seed, int width, int height, int channels);

// Seeded unit-Gaussian tensor; stream keyed per element index.
ImageF gaussian_image(int width, int height, int channels, std::uint64_t seed);

}  // namespace qp
