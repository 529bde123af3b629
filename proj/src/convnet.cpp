#include "quadprior/convnet.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "quadprior/errors.hpp"
#include "quadprior/rng.hpp"
#include "quadprior/tensor_io.hpp"

namespace qp {

using nlohmann::json;

ConvNet::ConvNet(const std::vector<int>& widths, int ksize, std::uint64_t seed,
                 bool zero_init_final)
    : widths_(widths), ksize_(ksize), seed_(seed), zero_init_final_(zero_init_final) {
  if (widths.size() < 2) throw std::invalid_argument("ConvNet: need at least one layer");
  if (ksize != 1 && ksize != 3) throw std::invalid_argument("ConvNet: ksize must be 1 or 3");

  std::size_t off = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer l;
    l.cin = widths[i];
    l.cout = widths[i + 1];
    l.ksize = ksize;
    l.activated = (i + 2 < widths.size());  // no activation after the final conv
    l.w_off = off;
    off += static_cast<std::size_t>(l.cout) * l.cin * ksize * ksize;
    l.b_off = off;
    off += static_cast<std::size_t>(l.cout);
    layers_.push_back(l);
  }
  params_.assign(off, 0.0);
  grads_.assign(off, 0.0);

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    bool final_layer = (i + 1 == layers_.size());
    if (final_layer && zero_init_final) continue;  // stays zero
    nn::init_conv_params(params_.data() + l.w_off, params_.data() + l.b_off, l.cin, l.cout,
                         l.ksize, derive_seed(seed, "convnet_layer", i));
  }
}

ConvNet ConvNet::toy_default(int sched_T, std::uint64_t seed) {
  ConvNet net({10, 32, 32, 32, 3}, 3, seed, /*zero_init_final=*/true);
  net.sched_T = sched_T;
  return net;
}

nn::Tensor ConvNet::make_input(const ImageF& zt, const ImageF& prior, int t) const {
  if (zt.channels + prior.channels + 1 != in_channels())
    throw std::invalid_argument("ConvNet: zt/prior channel counts do not match the input spec");
  if (zt.width != prior.width || zt.height != prior.height)
    throw std::invalid_argument("ConvNet: zt and prior spatial dims differ");
  if (sched_T < 1) throw state_error("ConvNet: sched_T not set");

  nn::Tensor in(in_channels(), zt.height, zt.width);
  int ci = 0;
  for (int c = 0; c < zt.channels; ++c, ++ci)
    for (int y = 0; y < zt.height; ++y)
      for (int x = 0; x < zt.width; ++x) in.at(ci, y, x) = zt.at(x, y, c);
  for (int c = 0; c < prior.channels; ++c, ++ci)
    for (int y = 0; y < zt.height; ++y)
      for (int x = 0; x < zt.width; ++x) in.at(ci, y, x) = prior.at(x, y, c);
  double tt = static_cast<double>(t) / sched_T;
  for (int y = 0; y < zt.height; ++y)
    for (int x = 0; x < zt.width; ++x) in.at(ci, y, x) = tt;
  return in;
}

nn::Tensor ConvNet::forward_tensor(const nn::Tensor& input) {
  if (input.c != in_channels())
    throw std::invalid_argument("ConvNet: input channel count mismatch");
  inputs_.clear();
  preacts_.clear();
  nn::Tensor cur = input;
  for (const Layer& l : layers_) {
    inputs_.push_back(cur);
    nn::Tensor pre =
        nn::conv2d_forward(cur, params_.data() + l.w_off, params_.data() + l.b_off, l.cout, l.ksize);
    preacts_.push_back(pre);
    cur = l.activated ? nn::act_forward(pre) : pre;
  }
  has_cache_ = true;
  return cur;
}

ImageF ConvNet::forward(const ImageF& zt, const ImageF& prior, int t) {
  return nn::to_image(forward_tensor(make_input(zt, prior, t)));
}

nn::Tensor ConvNet::backward(const nn::Tensor& upstream) {
  if (!has_cache_) throw state_error("ConvNet::backward: no cached forward pass");
  if (upstream.c != out_channels())
    throw std::invalid_argument("ConvNet::backward: upstream channel mismatch");

  std::fill(grads_.begin(), grads_.end(), 0.0);
  nn::Tensor d = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Layer& l = layers_[i];
    if (l.activated) {
      nn::Tensor dpre(d.c, d.h, d.w);
      nn::act_backward(preacts_[i], d, dpre);
      d = std::move(dpre);
    }
    nn::Tensor din(inputs_[i].c, inputs_[i].h, inputs_[i].w);
    nn::conv2d_backward(inputs_[i], d, params_.data() + l.w_off, l.cout, l.ksize, &din,
                        grads_.data() + l.w_off, grads_.data() + l.b_off);
    d = std::move(din);
  }
  return d;
}

void ConvNet::drop_cache() {
  has_cache_ = false;
  inputs_.clear();
  preacts_.clear();
}

void ConvNet::save(const std::string& path) const {
  json header{{"kind", "convnet"},
              {"widths", widths_},
              {"ksize", ksize_},
              {"seed", seed_},
              {"zero_init_final", zero_init_final_},
              {"sched_T", sched_T}};
  std::string head = header.dump();
  head.push_back('\n');

  ImageF blob(static_cast<int>(params_.size()), 1, 1);
  for (std::size_t i = 0; i < params_.size(); ++i) blob.data[i] = static_cast<float>(params_[i]);
  auto qpt = encode_qpt(blob);

  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  bytes.insert(bytes.end(), qpt.begin(), qpt.end());
  atomic_write_file(path, bytes.data(), bytes.size());
}

ConvNet ConvNet::load(const std::string& path) {
  auto bytes = read_file_bytes(path);
  auto nl = std::find(bytes.begin(), bytes.end(), static_cast<std::uint8_t>('\n'));
  if (nl == bytes.end()) throw io_error("ConvNet::load: missing header in '" + path + "'");
  json header = json::parse(std::string(bytes.begin(), nl));
  if (header.value("kind", "") != "convnet")
    throw io_error("ConvNet::load: '" + path + "' is not a convnet checkpoint");

  ConvNet net(header.at("widths").get<std::vector<int>>(), header.at("ksize").get<int>(),
              header.at("seed").get<std::uint64_t>(), header.at("zero_init_final").get<bool>());
  net.sched_T = header.value("sched_T", 0);

  ImageF blob = decode_qpt(std::vector<std::uint8_t>(nl + 1, bytes.end()), path);
  if (blob.data.size() != net.params_.size())
    throw io_error("ConvNet::load: parameter blob size mismatch in '" + path + "'");
  for (std::size_t i = 0; i < blob.data.size(); ++i) net.params_[i] = blob.data[i];
  return net;
}

}  // namespace qp
