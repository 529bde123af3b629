#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadprior/nn.hpp"

namespace qp {

// Toy autoencoder with a bypass decoder. Three downsampling encoder stages
// emit skip features z1 (full res), z2 (half), z3 (quarter) and the latent z
// (eighth). The bypass decoder fuses the skips through zero-initialized 1x1
// convolutions (no bias) and finishes with a residual block initialized to
// identity, so at initialization decode_bypass == decode_plain exactly.
class ToyAE {
 public:
  struct Seg {  // one conv's slot in the flat parameter vector
    int cin, cout, ksize;
    bool bias;
    std::size_t w_off, b_off;
  };

  // widths = encoder channel progression, default {3, 16, 32, 64}.
  explicit ToyAE(const std::vector<int>& widths = {3, 16, 32, 64}, std::uint64_t seed = 0);

  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }

  // Index ranges of the bypass-only parameters (fusion convs + residual
  // block); phase-2 training updates exactly these.
  std::pair<std::size_t, std::size_t> bypass_param_range() const { return {bypass_begin_, params_.size()}; }

  struct Encoded {
    nn::Tensor z;             // latent, eighth resolution
    nn::Tensor z1, z2, z3;    // skips: full, half, quarter resolution
  };

  Encoded encode(const nn::Tensor& img) const;
  nn::Tensor decode_plain(const nn::Tensor& z) const;
  nn::Tensor decode_bypass(const nn::Tensor& z, const Encoded& skips) const;

  // Training-facing passes with caches + manual backward. The graph is small
  // enough to cache explicitly per call.
  struct PlainCache;
  struct BypassCache;

  nn::Tensor decode_plain_cached(const nn::Tensor& z, PlainCache& cache) const;
  // Accumulates parameter grads into `grads`; returns d loss / d z.
  nn::Tensor decode_plain_backward(const nn::Tensor& dout, const PlainCache& cache,
                                   std::vector<double>& grads) const;

  nn::Tensor decode_bypass_cached(const nn::Tensor& z, const Encoded& skips,
                                  BypassCache& cache) const;
  struct BypassGrads {
    nn::Tensor dz, dz1, dz2, dz3;
  };
  BypassGrads decode_bypass_backward(const nn::Tensor& dout, const BypassCache& cache,
                                     std::vector<double>& grads) const;

  struct EncodeCache;
  Encoded encode_cached(const nn::Tensor& img, EncodeCache& cache) const;
  // dz* may be empty tensors (treated as zero). Returns d loss / d input image.
  nn::Tensor encode_backward(const nn::Tensor& dz, const nn::Tensor& dz1, const nn::Tensor& dz2,
                             const nn::Tensor& dz3, const EncodeCache& cache,
                             std::vector<double>& grads) const;

  void save(const std::string& path) const;
  static ToyAE load(const std::string& path);

  // Caches are plain activation records.
  struct EncodeCache {
    nn::Tensor in, pre1, a1, p1, pre2, a2, p2, pre3, a3;
  };
  struct PlainCache {
    nn::Tensor z, u3, pre_d3, a3, u2, pre_d2, a2, u1, pre_d1, a1;
  };
  struct BypassCache {
    PlainCache base;
    nn::Tensor s3, s2, s1;     // post-fusion sums
    nn::Tensor y0, pre_ra, ha; // residual block intermediates
    const Encoded* skips = nullptr;
  };

 private:
  enum SegId { E1, E2, E3, D3, D2, D1, OUT, F3, F2, F1, RA, RB, SEG_COUNT };
  Seg seg_[SEG_COUNT];
  std::vector<int> widths_;
  std::uint64_t seed_ = 0;
  std::vector<double> params_, grads_;
  std::size_t bypass_begin_ = 0;

  nn::Tensor run_conv(SegId id, const nn::Tensor& in) const;
  void back_conv(SegId id, const nn::Tensor& in, const nn::Tensor& dout, nn::Tensor* din,
                 std::vector<double>& grads) const;
};

}  // namespace qp
