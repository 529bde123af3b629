#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadprior/bypass_ae.hpp"
#include "quadprior/color_model.hpp"
#include "quadprior/convnet.hpp"
#include "quadprior/diffusion.hpp"
#include "quadprior/image.hpp"

namespace qp {

// Configuration for the toy conditional-denoiser run. All randomness flows
// from `seed` through labeled sub-streams, so a config fully pins a run.
struct TrainConfig {
  int steps = 2000;
  int batch = 4;
  double lr = 0.15;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  int image_size = 32;

  int sched_T = 50;
  double sched_beta1 = 0.01;
  double sched_betaT = 0.20;

  // Illumination jitter applied to the prior-source copy of each training image.
  double gain_lo = 0.10, gain_hi = 1.00;
  double gamma_lo = 0.60, gamma_hi = 1.40;
  // Gaussian-Poisson corruption ranges used while extracting the prior.
  double noise_sigma_lo = 0.00, noise_sigma_hi = 0.05;
  double noise_peak_lo = 50.0, noise_peak_hi = 1000.0;

  ColorModel color_model{};

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct TraceRow {
  int step;
  double loss_noise;
  double loss_z0;
  double loss_diff;
};

struct ToyTrainResult {
  ConvNet net;
  std::vector<TraceRow> trace;
};

// SGD with gradient clipping on loss_diff; deterministic per config. Throws
// numeric_error naming the step index if the loss goes non-finite.
ToyTrainResult train_toy(const TrainConfig& cfg);

// Fig-style inference: extract the prior from the low-light image, run the
// reverse chain conditioned on it, clamp to [0,1].
ImageF enhance_toy(ConvNet& net, const ImageF& low_img, const ColorModel& cm,
                   const NoiseSchedule& sched, std::uint64_t seed);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);
std::vector<TraceRow> read_trace_csv(const std::string& path);

// ---- bypass autoencoder training ----

struct BypassTrainConfig {
  int pretrain_steps = 500;
  int fusion_steps = 400;
  int batch = 2;
  double lr = 0.03;
  double clip_norm = 1.0;
  std::uint64_t seed = 7;
  int image_size = 64;

  // Distortion applied to the skip-source copy in the fusion phase.
  double gain_lo = 0.15, gain_hi = 0.90;
  double gamma_lo = 0.70, gamma_hi = 1.30;
  double noise_sigma_lo = 0.00, noise_sigma_hi = 0.04;
  double noise_peak_lo = 100.0, noise_peak_hi = 1000.0;
  bool identity_distortion = false;  // skip distortion entirely (diagnostics)

  std::string to_json() const;
  static BypassTrainConfig from_json(const std::string& text);
};

struct BypassTrainResult {
  ToyAE ae;
  std::vector<double> pretrain_trace;  // per-step plain reconstruction MSE
  std::vector<double> fusion_trace;    // per-step bypass reconstruction MSE
};

// Phase 1: train encoder+decoder on clean reconstruction (the fusion/residual
// tail keeps its zero/identity init). Phase 2: train only the fusion convs and
// residual block to reconstruct I from (latent of I, skips of distorted I).
BypassTrainResult train_bypass(const BypassTrainConfig& cfg);

// Individual phases, for tests that need to intervene between them.
std::vector<double> pretrain_plain(ToyAE& ae, const BypassTrainConfig& cfg);
std::vector<double> train_fusion(ToyAE& ae, const BypassTrainConfig& cfg);

// The deterministic distortion used by the fusion phase for item `index`.
ImageF bypass_distort(const ImageF& clean, const BypassTrainConfig& cfg, std::uint64_t index);

}  // namespace qp
