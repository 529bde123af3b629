#include "quadprior/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "quadprior/distortion.hpp"
#include "quadprior/errors.hpp"
#include "quadprior/rng.hpp"
#include "quadprior/synth.hpp"
#include "quadprior/tensor_io.hpp"

namespace qp {

using nlohmann::json;

std::string TrainConfig::to_json() const {
  json j{{"steps", steps},
         {"batch", batch},
         {"lr", lr},
         {"clip_norm", clip_norm},
         {"seed", seed},
         {"image_size", image_size},
         {"schedule", {{"T", sched_T}, {"beta1", sched_beta1}, {"betaT", sched_betaT}}},
         {"gain_range", {gain_lo, gain_hi}},
         {"gamma_range", {gamma_lo, gamma_hi}},
         {"noise_sigma_range", {noise_sigma_lo, noise_sigma_hi}},
         {"noise_peak_range", {noise_peak_lo, noise_peak_hi}},
         {"color_model", json::parse(color_model.to_json())}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.image_size = j.value("image_size", c.image_size);
  if (j.contains("schedule")) {
    c.sched_T = j["schedule"].value("T", c.sched_T);
    c.sched_beta1 = j["schedule"].value("beta1", c.sched_beta1);
    c.sched_betaT = j["schedule"].value("betaT", c.sched_betaT);
  }
  auto range = [&](const char* key, double& lo, double& hi) {
    if (j.contains(key)) {
      lo = j[key].at(0).get<double>();
      hi = j[key].at(1).get<double>();
    }
  };
  range("gain_range", c.gain_lo, c.gain_hi);
  range("gamma_range", c.gamma_lo, c.gamma_hi);
  range("noise_sigma_range", c.noise_sigma_lo, c.noise_sigma_hi);
  range("noise_peak_range", c.noise_peak_lo, c.noise_peak_hi);
  if (j.contains("color_model")) c.color_model = ColorModel::from_json(j["color_model"].dump());
  if (c.steps < 1 || c.batch < 1 || !(c.lr >= 0.0))
    throw std::invalid_argument("TrainConfig: positive counts and a non-negative rate required");
  return c;
}

namespace {

double uniform_in(CounterRng& rng, double lo, double hi) { return lo + (hi - lo) * rng.next_unit(); }

struct SampleDraw {
  ImageF clean;   // z0 target
  ImageF prior;   // 6-channel condition from the darkened+noised copy
  int t;
  ImageF eps;
};

SampleDraw draw_training_sample(const TrainConfig& cfg, std::uint64_t index) {
  SampleDraw s;
  s.clean = synth_image(cfg.image_size, cfg.image_size, derive_seed(cfg.seed, "train_img", index));

  CounterRng rng(derive_seed(cfg.seed, "jitter", index));
  IlluminationSpec ispec;
  ispec.gain = uniform_in(rng, cfg.gain_lo, cfg.gain_hi);
  ispec.gamma = uniform_in(rng, cfg.gamma_lo, cfg.gamma_hi);
  ispec.seed = derive_seed(cfg.seed, "illum", index);
  ImageF dark = apply_illumination(s.clean, ispec);

  NoiseSpec nspec;
  nspec.gauss_sigma = uniform_in(rng, cfg.noise_sigma_lo, cfg.noise_sigma_hi);
  nspec.poisson_peak = uniform_in(rng, cfg.noise_peak_lo, cfg.noise_peak_hi);
  nspec.seed = derive_seed(cfg.seed, "noise", index);
  s.prior = extract_prior(dark, cfg.color_model, nspec).stacked();

  s.t = 1 + static_cast<int>(rng.next_unit() * cfg.sched_T);
  if (s.t > cfg.sched_T) s.t = cfg.sched_T;
  s.eps = gaussian_image(cfg.image_size, cfg.image_size, 3, derive_seed(cfg.seed, "eps", index));
  return s;
}

}  // namespace

ToyTrainResult train_toy(const TrainConfig& cfg) {
  NoiseSchedule sched = make_linear_schedule(cfg.sched_T, cfg.sched_beta1, cfg.sched_betaT);
  ConvNet net = ConvNet::toy_default(cfg.sched_T, derive_seed(cfg.seed, "net_init"));

  std::vector<TraceRow> trace;
  trace.reserve(cfg.steps);
  std::vector<double> accum(net.param_count(), 0.0);
  const std::size_t n_px = static_cast<std::size_t>(cfg.image_size) * cfg.image_size * 3;

  for (int step = 0; step < cfg.steps; ++step) {
    std::fill(accum.begin(), accum.end(), 0.0);
    double ln_sum = 0.0, lz_sum = 0.0;

    for (int b = 0; b < cfg.batch; ++b) {
      std::uint64_t index = static_cast<std::uint64_t>(step) * cfg.batch + b;
      SampleDraw s = draw_training_sample(cfg, index);
      ImageF zt = forward_sample(s.clean, s.t, s.eps, sched);

      // Net and loss arithmetic stay in 64-bit; rasters are the only float32
      // stage. This keeps the gradients FD-auditable.
      nn::Tensor eps_hat = net.forward_tensor(net.make_input(zt, s.prior, s.t));
      nn::Tensor eps_t = nn::from_image(s.eps);
      nn::Tensor z0_t = nn::from_image(s.clean);
      nn::Tensor zt_t = nn::from_image(zt);

      double ab = sched.alpha_bar_at(s.t);
      double inv_sab = 1.0 / std::sqrt(ab);
      double c_z0 = -std::sqrt(1.0 - ab) * inv_sab;

      double ln = 0.0, lz = 0.0;
      nn::Tensor upstream(3, cfg.image_size, cfg.image_size);
      for (std::size_t i = 0; i < eps_hat.v.size(); ++i) {
        double de = eps_hat.v[i] - eps_t.v[i];
        ln += de * de;
        double z0_hat = (zt_t.v[i] - std::sqrt(1.0 - ab) * eps_hat.v[i]) * inv_sab;
        double dz = z0_hat - z0_t.v[i];
        lz += dz * dz;
        upstream.v[i] = (2.0 * de + 2.0 * dz * c_z0) / static_cast<double>(n_px);
      }
      ln /= static_cast<double>(n_px);
      lz /= static_cast<double>(n_px);
      ln_sum += ln;
      lz_sum += lz;

      net.backward(upstream);
      for (std::size_t i = 0; i < accum.size(); ++i) accum[i] += net.grads()[i];
    }

    TraceRow row{step, ln_sum / cfg.batch, lz_sum / cfg.batch, (ln_sum + lz_sum) / cfg.batch};
    if (!std::isfinite(row.loss_diff))
      throw numeric_error("train_toy: loss went non-finite at step " + std::to_string(step));
    trace.push_back(row);

    for (std::size_t i = 0; i < accum.size(); ++i) net.grads()[i] = accum[i] / cfg.batch;
    nn::sgd_step(net.params(), net.grads(), cfg.lr, cfg.clip_norm);
  }
  net.drop_cache();
  return ToyTrainResult{std::move(net), std::move(trace)};
}

ImageF enhance_toy(ConvNet& net, const ImageF& low_img, const ColorModel& cm,
                   const NoiseSchedule& sched, std::uint64_t seed) {
  if (low_img.channels != 3) throw std::invalid_argument("enhance_toy: RGB input required");
  ImageF prior = extract_prior(low_img, cm).stacked();
  Denoiser den = [&net](const ImageF& zt, int t, const ImageF& cond) {
    return net.forward(zt, cond, t);
  };
  ImageF z0_hat = sample_loop(den, prior, sched, seed, low_img.width, low_img.height, 3);
  net.drop_cache();
  return clamped(z0_hat, 0.0f, 1.0f);
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ostringstream out;
  out << "step,loss_noise,loss_z0,loss_diff\n";
  char buf[160];
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g\n", r.step, r.loss_noise, r.loss_z0,
                  r.loss_diff);
    out << buf;
  }
  std::string s = out.str();
  atomic_write_file(path, s.data(), s.size());
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  auto bytes = read_file_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  std::vector<TraceRow> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    TraceRow r{};
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &r.step, &r.loss_noise, &r.loss_z0,
                    &r.loss_diff) == 4)
      rows.push_back(r);
  }
  return rows;
}

// ---- bypass autoencoder ----

std::string BypassTrainConfig::to_json() const {
  json j{{"pretrain_steps", pretrain_steps},
         {"fusion_steps", fusion_steps},
         {"batch", batch},
         {"lr", lr},
         {"clip_norm", clip_norm},
         {"seed", seed},
         {"image_size", image_size},
         {"gain_range", {gain_lo, gain_hi}},
         {"gamma_range", {gamma_lo, gamma_hi}},
         {"noise_sigma_range", {noise_sigma_lo, noise_sigma_hi}},
         {"noise_peak_range", {noise_peak_lo, noise_peak_hi}},
         {"identity_distortion", identity_distortion}};
  return j.dump();
}

BypassTrainConfig BypassTrainConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  BypassTrainConfig c;
  c.pretrain_steps = j.value("pretrain_steps", c.pretrain_steps);
  c.fusion_steps = j.value("fusion_steps", c.fusion_steps);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.image_size = j.value("image_size", c.image_size);
  auto range = [&](const char* key, double& lo, double& hi) {
    if (j.contains(key)) {
      lo = j[key].at(0).get<double>();
      hi = j[key].at(1).get<double>();
    }
  };
  range("gain_range", c.gain_lo, c.gain_hi);
  range("gamma_range", c.gamma_lo, c.gamma_hi);
  range("noise_sigma_range", c.noise_sigma_lo, c.noise_sigma_hi);
  range("noise_peak_range", c.noise_peak_lo, c.noise_peak_hi);
  c.identity_distortion = j.value("identity_distortion", c.identity_distortion);
  if (c.pretrain_steps < 0 || c.fusion_steps < 0 || c.batch < 1 || !(c.lr >= 0.0))
    throw std::invalid_argument("BypassTrainConfig: invalid counts or rate");
  return c;
}

ImageF bypass_distort(const ImageF& clean, const BypassTrainConfig& cfg, std::uint64_t index) {
  if (cfg.identity_distortion) return clean;
  CounterRng rng(derive_seed(cfg.seed, "byp_jitter", index));
  IlluminationSpec ispec;
  ispec.gain = uniform_in(rng, cfg.gain_lo, cfg.gain_hi);
  ispec.gamma = uniform_in(rng, cfg.gamma_lo, cfg.gamma_hi);
  ispec.seed = derive_seed(cfg.seed, "byp_illum", index);
  ImageF out = apply_illumination(clean, ispec);

  NoiseSpec nspec;
  nspec.gauss_sigma = uniform_in(rng, cfg.noise_sigma_lo, cfg.noise_sigma_hi);
  nspec.poisson_peak = uniform_in(rng, cfg.noise_peak_lo, cfg.noise_peak_hi);
  nspec.seed = derive_seed(cfg.seed, "byp_noise", index);
  return add_gauss_poisson(out, nspec);
}

namespace {

double tensor_mse(const nn::Tensor& a, const nn::Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    double d = a.v[i] - b.v[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.v.size());
}

void sgd_masked(std::vector<double>& params, const std::vector<double>& grads, double lr,
                double clip_norm, std::size_t begin, std::size_t end) {
  double sq = 0.0;
  for (std::size_t i = begin; i < end; ++i) sq += grads[i] * grads[i];
  double norm = std::sqrt(sq);
  double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  for (std::size_t i = begin; i < end; ++i) params[i] -= lr * scale * grads[i];
}

}  // namespace

std::vector<double> pretrain_plain(ToyAE& ae, const BypassTrainConfig& cfg) {
  std::vector<double> trace;
  trace.reserve(cfg.pretrain_steps);
  std::vector<double> accum(ae.param_count(), 0.0);

  for (int step = 0; step < cfg.pretrain_steps; ++step) {
    std::fill(accum.begin(), accum.end(), 0.0);
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      std::uint64_t index = static_cast<std::uint64_t>(step) * cfg.batch + b;
      ImageF clean =
          synth_image(cfg.image_size, cfg.image_size, derive_seed(cfg.seed, "byp_img", index));
      nn::Tensor x = nn::from_image(clean);

      ToyAE::EncodeCache ec;
      ToyAE::Encoded enc = ae.encode_cached(x, ec);
      ToyAE::PlainCache pc;
      nn::Tensor y = ae.decode_plain_cached(enc.z, pc);

      double loss = tensor_mse(y, x);
      loss_sum += loss;
      nn::Tensor dout(y.c, y.h, y.w);
      for (std::size_t i = 0; i < y.v.size(); ++i)
        dout.v[i] = 2.0 * (y.v[i] - x.v[i]) / static_cast<double>(y.v.size());

      std::fill(ae.grads().begin(), ae.grads().end(), 0.0);
      nn::Tensor dz = ae.decode_plain_backward(dout, pc, ae.grads());
      ae.encode_backward(dz, {}, {}, {}, ec, ae.grads());
      for (std::size_t i = 0; i < accum.size(); ++i) accum[i] += ae.grads()[i];
    }
    double mean_loss = loss_sum / cfg.batch;
    if (!std::isfinite(mean_loss))
      throw numeric_error("pretrain_plain: loss went non-finite at step " + std::to_string(step));
    trace.push_back(mean_loss);
    for (std::size_t i = 0; i < accum.size(); ++i) ae.grads()[i] = accum[i] / cfg.batch;
    nn::sgd_step(ae.params(), ae.grads(), cfg.lr, cfg.clip_norm);
  }
  return trace;
}

std::vector<double> train_fusion(ToyAE& ae, const BypassTrainConfig& cfg) {
  std::vector<double> trace;
  trace.reserve(cfg.fusion_steps);
  std::vector<double> accum(ae.param_count(), 0.0);
  auto [byp_begin, byp_end] = ae.bypass_param_range();

  for (int step = 0; step < cfg.fusion_steps; ++step) {
    std::fill(accum.begin(), accum.end(), 0.0);
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      std::uint64_t index =
          0x10000000ull + static_cast<std::uint64_t>(step) * cfg.batch + b;  // distinct stream
      ImageF clean =
          synth_image(cfg.image_size, cfg.image_size, derive_seed(cfg.seed, "byp_img", index));
      ImageF distorted = bypass_distort(clean, cfg, index);

      nn::Tensor x = nn::from_image(clean);
      nn::Tensor xd = nn::from_image(distorted);

      ToyAE::Encoded enc_clean = ae.encode(x);
      ToyAE::Encoded enc_dist = ae.encode(xd);
      ToyAE::Encoded mix;
      mix.z = enc_clean.z;
      mix.z1 = enc_dist.z1;
      mix.z2 = enc_dist.z2;
      mix.z3 = enc_dist.z3;

      ToyAE::BypassCache bc;
      nn::Tensor y = ae.decode_bypass_cached(mix.z, mix, bc);
      double loss = tensor_mse(y, x);
      loss_sum += loss;

      nn::Tensor dout(y.c, y.h, y.w);
      for (std::size_t i = 0; i < y.v.size(); ++i)
        dout.v[i] = 2.0 * (y.v[i] - x.v[i]) / static_cast<double>(y.v.size());

      std::fill(ae.grads().begin(), ae.grads().end(), 0.0);
      ae.decode_bypass_backward(dout, bc, ae.grads());
      for (std::size_t i = byp_begin; i < byp_end; ++i) accum[i] += ae.grads()[i];
    }
    double mean_loss = loss_sum / cfg.batch;
    if (!std::isfinite(mean_loss))
      throw numeric_error("train_fusion: loss went non-finite at step " + std::to_string(step));
    trace.push_back(mean_loss);
    for (std::size_t i = byp_begin; i < byp_end; ++i) ae.grads()[i] = accum[i] / cfg.batch;
    sgd_masked(ae.params(), ae.grads(), cfg.lr, cfg.clip_norm, byp_begin, byp_end);
  }
  return trace;
}

BypassTrainResult train_bypass(const BypassTrainConfig& cfg) {
  ToyAE ae({3, 16, 32, 64}, derive_seed(cfg.seed, "toyae_init"));
  BypassTrainResult r{std::move(ae), {}, {}};
  r.pretrain_trace = pretrain_plain(r.ae, cfg);
  r.fusion_trace = train_fusion(r.ae, cfg);
  return r;
}

}  // namespace qp
