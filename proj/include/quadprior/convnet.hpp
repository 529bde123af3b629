#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadprior/image.hpp"
#include "quadprior/nn.hpp"

namespace qp {

// Small conditional denoiser: a stack of same-resolution convolutions taking
// concat(z_t, 6 prior channels, broadcast t/T) and predicting eps_hat. The
// final layer starts at zero so the net is inert until trained. Parameters and
// gradients live in flat vectors of equal length; forward caches activations
// for the manual backward pass.
class ConvNet {
 public:
  struct Layer {
    int cin, cout, ksize;
    bool activated;          // smooth leaky rectifier after the conv
    std::size_t w_off, b_off;
  };

  // widths = channel counts, e.g. {10, 32, 32, 32, 3}; ksize per layer is 3.
  // zero_init_final makes the last layer (weights and bias) exactly zero.
  ConvNet(const std::vector<int>& widths, int ksize, std::uint64_t seed, bool zero_init_final);

  static ConvNet toy_default(int sched_T, std::uint64_t seed);

  int in_channels() const { return layers_.front().cin; }
  int out_channels() const { return layers_.back().cout; }
  std::size_t param_count() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }
  const std::vector<double>& grads() const { return grads_; }
  const std::vector<Layer>& layers() const { return layers_; }

  int sched_T = 0;  // diffusion horizon used for the t/T conditioning plane

  // eps_hat prediction; caches activations. zt must have 3 channels, prior 6.
  ImageF forward(const ImageF& zt, const ImageF& prior, int t);

  // Raw-tensor variants used by trainers/tests.
  nn::Tensor forward_tensor(const nn::Tensor& input);

  // Chain rule back to parameter gradients; grads() is overwritten. Throws
  // state_error unless a cached forward exists. Returns d loss / d input.
  nn::Tensor backward(const nn::Tensor& upstream);

  nn::Tensor make_input(const ImageF& zt, const ImageF& prior, int t) const;

  bool has_cache() const { return has_cache_; }
  void drop_cache();

  // Checkpoint: single-line JSON header, '\n', then a QPT1 blob holding the
  // parameter vector as float32.
  void save(const std::string& path) const;
  static ConvNet load(const std::string& path);

 private:
  std::vector<Layer> layers_;
  std::vector<int> widths_;
  int ksize_ = 3;
  std::uint64_t seed_ = 0;
  bool zero_init_final_ = true;
  std::vector<double> params_, grads_;

  bool has_cache_ = false;
  std::vector<nn::Tensor> inputs_;   // input to each layer
  std::vector<nn::Tensor> preacts_;  // conv output before activation
};

}  // namespace qp
