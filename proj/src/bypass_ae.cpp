#include "quadprior/bypass_ae.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "quadprior/errors.hpp"
#include "quadprior/image.hpp"
#include "quadprior/rng.hpp"
#include "quadprior/tensor_io.hpp"

namespace qp {

using nlohmann::json;
using nn::Tensor;

ToyAE::ToyAE(const std::vector<int>& widths, std::uint64_t seed) : widths_(widths), seed_(seed) {
  if (widths.size() != 4) throw std::invalid_argument("ToyAE: widths must have 4 entries");
  const int c0 = widths[0], c1 = widths[1], c2 = widths[2], c3 = widths[3];
  const int cr = std::max(4, c0 * 2 + 2);  // residual block hidden width

  auto def = [&](SegId id, int cin, int cout, int k, bool bias) {
    seg_[id] = Seg{cin, cout, k, bias, 0, 0};
  };
  def(E1, c0, c1, 3, true);
  def(E2, c1, c2, 3, true);
  def(E3, c2, c3, 3, true);
  def(D3, c3, c3, 3, true);
  def(D2, c3, c2, 3, true);
  def(D1, c2, c1, 3, true);
  def(OUT, c1, c0, 3, true);
  def(F3, c3, c3, 1, false);  // fusion convs carry no bias: zero skips stay zero
  def(F2, c2, c2, 1, false);
  def(F1, c1, c1, 1, false);
  def(RA, c0, cr, 3, true);
  def(RB, cr, c0, 3, true);

  std::size_t off = 0;
  for (int i = 0; i < SEG_COUNT; ++i) {
    if (i == F3) bypass_begin_ = off;  // fusion + residual params live at the tail
    seg_[i].w_off = off;
    off += static_cast<std::size_t>(seg_[i].cout) * seg_[i].cin * seg_[i].ksize * seg_[i].ksize;
    seg_[i].b_off = off;
    if (seg_[i].bias) off += static_cast<std::size_t>(seg_[i].cout);
  }
  params_.assign(off, 0.0);
  grads_.assign(off, 0.0);

  for (int i = 0; i < SEG_COUNT; ++i) {
    if (i == F3 || i == F2 || i == F1 || i == RB) continue;  // zero/identity init
    nn::init_conv_params(params_.data() + seg_[i].w_off,
                         seg_[i].bias ? params_.data() + seg_[i].b_off : nullptr, seg_[i].cin,
                         seg_[i].cout, seg_[i].ksize, derive_seed(seed, "toyae_seg", i));
  }
}

Tensor ToyAE::run_conv(SegId id, const Tensor& in) const {
  const Seg& s = seg_[id];
  return nn::conv2d_forward(in, params_.data() + s.w_off,
                            s.bias ? params_.data() + s.b_off : nullptr, s.cout, s.ksize);
}

void ToyAE::back_conv(SegId id, const Tensor& in, const Tensor& dout, Tensor* din,
                      std::vector<double>& grads) const {
  const Seg& s = seg_[id];
  nn::conv2d_backward(in, dout, params_.data() + s.w_off, s.cout, s.ksize, din,
                      grads.data() + s.w_off, s.bias ? grads.data() + s.b_off : nullptr);
}

ToyAE::Encoded ToyAE::encode_cached(const Tensor& img, EncodeCache& c) const {
  if (img.c != widths_[0]) throw std::invalid_argument("ToyAE::encode: channel mismatch");
  if (img.h % 8 != 0 || img.w % 8 != 0)
    throw std::invalid_argument("ToyAE::encode: dims must be multiples of 8");
  c.in = img;
  c.pre1 = run_conv(E1, c.in);
  c.a1 = nn::act_forward(c.pre1);
  c.p1 = nn::avgpool2_forward(c.a1);
  c.pre2 = run_conv(E2, c.p1);
  c.a2 = nn::act_forward(c.pre2);
  c.p2 = nn::avgpool2_forward(c.a2);
  c.pre3 = run_conv(E3, c.p2);
  c.a3 = nn::act_forward(c.pre3);

  Encoded e;
  e.z1 = c.a1;
  e.z2 = c.a2;
  e.z3 = c.a3;
  e.z = nn::avgpool2_forward(c.a3);
  return e;
}

ToyAE::Encoded ToyAE::encode(const Tensor& img) const {
  EncodeCache c;
  return encode_cached(img, c);
}

Tensor ToyAE::encode_backward(const Tensor& dz, const Tensor& dz1, const Tensor& dz2,
                              const Tensor& dz3, const EncodeCache& c,
                              std::vector<double>& grads) const {
  Tensor da3(c.a3.c, c.a3.h, c.a3.w);
  if (!dz.v.empty()) nn::avgpool2_backward(dz, da3);
  if (!dz3.v.empty())
    for (std::size_t i = 0; i < da3.v.size(); ++i) da3.v[i] += dz3.v[i];

  Tensor dpre3(c.pre3.c, c.pre3.h, c.pre3.w);
  nn::act_backward(c.pre3, da3, dpre3);
  Tensor dp2(c.p2.c, c.p2.h, c.p2.w);
  back_conv(E3, c.p2, dpre3, &dp2, grads);

  Tensor da2(c.a2.c, c.a2.h, c.a2.w);
  nn::avgpool2_backward(dp2, da2);
  if (!dz2.v.empty())
    for (std::size_t i = 0; i < da2.v.size(); ++i) da2.v[i] += dz2.v[i];

  Tensor dpre2(c.pre2.c, c.pre2.h, c.pre2.w);
  nn::act_backward(c.pre2, da2, dpre2);
  Tensor dp1(c.p1.c, c.p1.h, c.p1.w);
  back_conv(E2, c.p1, dpre2, &dp1, grads);

  Tensor da1(c.a1.c, c.a1.h, c.a1.w);
  nn::avgpool2_backward(dp1, da1);
  if (!dz1.v.empty())
    for (std::size_t i = 0; i < da1.v.size(); ++i) da1.v[i] += dz1.v[i];

  Tensor dpre1(c.pre1.c, c.pre1.h, c.pre1.w);
  nn::act_backward(c.pre1, da1, dpre1);
  Tensor din(c.in.c, c.in.h, c.in.w);
  back_conv(E1, c.in, dpre1, &din, grads);
  return din;
}

Tensor ToyAE::decode_plain_cached(const Tensor& z, PlainCache& c) const {
  c.z = z;
  c.u3 = nn::upsample2_forward(z);
  c.pre_d3 = run_conv(D3, c.u3);
  c.a3 = nn::act_forward(c.pre_d3);
  c.u2 = nn::upsample2_forward(c.a3);
  c.pre_d2 = run_conv(D2, c.u2);
  c.a2 = nn::act_forward(c.pre_d2);
  c.u1 = nn::upsample2_forward(c.a2);
  c.pre_d1 = run_conv(D1, c.u1);
  c.a1 = nn::act_forward(c.pre_d1);
  return run_conv(OUT, c.a1);
}

Tensor ToyAE::decode_plain(const Tensor& z) const {
  PlainCache c;
  return decode_plain_cached(z, c);
}

Tensor ToyAE::decode_plain_backward(const Tensor& dout, const PlainCache& c,
                                    std::vector<double>& grads) const {
  Tensor da1(c.a1.c, c.a1.h, c.a1.w);
  back_conv(OUT, c.a1, dout, &da1, grads);

  Tensor dpre1(c.pre_d1.c, c.pre_d1.h, c.pre_d1.w);
  nn::act_backward(c.pre_d1, da1, dpre1);
  Tensor du1(c.u1.c, c.u1.h, c.u1.w);
  back_conv(D1, c.u1, dpre1, &du1, grads);
  Tensor da2(c.a2.c, c.a2.h, c.a2.w);
  nn::upsample2_backward(du1, da2);

  Tensor dpre2(c.pre_d2.c, c.pre_d2.h, c.pre_d2.w);
  nn::act_backward(c.pre_d2, da2, dpre2);
  Tensor du2(c.u2.c, c.u2.h, c.u2.w);
  back_conv(D2, c.u2, dpre2, &du2, grads);
  Tensor da3(c.a3.c, c.a3.h, c.a3.w);
  nn::upsample2_backward(du2, da3);

  Tensor dpre3(c.pre_d3.c, c.pre_d3.h, c.pre_d3.w);
  nn::act_backward(c.pre_d3, da3, dpre3);
  Tensor du3(c.u3.c, c.u3.h, c.u3.w);
  back_conv(D3, c.u3, dpre3, &du3, grads);
  Tensor dz(c.z.c, c.z.h, c.z.w);
  nn::upsample2_backward(du3, dz);
  return dz;
}

Tensor ToyAE::decode_bypass_cached(const Tensor& z, const Encoded& skips, BypassCache& c) const {
  c.skips = &skips;
  c.base.z = z;
  c.base.u3 = nn::upsample2_forward(z);
  c.base.pre_d3 = run_conv(D3, c.base.u3);
  c.base.a3 = nn::act_forward(c.base.pre_d3);
  if (!c.base.a3.same_shape(skips.z3))
    throw std::invalid_argument("ToyAE::decode_bypass: z3 shape mismatch");
  c.s3 = c.base.a3;
  {
    Tensor f = run_conv(F3, skips.z3);
    for (std::size_t i = 0; i < c.s3.v.size(); ++i) c.s3.v[i] += f.v[i];
  }

  c.base.u2 = nn::upsample2_forward(c.s3);
  c.base.pre_d2 = run_conv(D2, c.base.u2);
  c.base.a2 = nn::act_forward(c.base.pre_d2);
  if (!c.base.a2.same_shape(skips.z2))
    throw std::invalid_argument("ToyAE::decode_bypass: z2 shape mismatch");
  c.s2 = c.base.a2;
  {
    Tensor f = run_conv(F2, skips.z2);
    for (std::size_t i = 0; i < c.s2.v.size(); ++i) c.s2.v[i] += f.v[i];
  }

  c.base.u1 = nn::upsample2_forward(c.s2);
  c.base.pre_d1 = run_conv(D1, c.base.u1);
  c.base.a1 = nn::act_forward(c.base.pre_d1);
  if (!c.base.a1.same_shape(skips.z1))
    throw std::invalid_argument("ToyAE::decode_bypass: z1 shape mismatch");
  c.s1 = c.base.a1;
  {
    Tensor f = run_conv(F1, skips.z1);
    for (std::size_t i = 0; i < c.s1.v.size(); ++i) c.s1.v[i] += f.v[i];
  }

  c.y0 = run_conv(OUT, c.s1);
  c.pre_ra = run_conv(RA, c.y0);
  c.ha = nn::act_forward(c.pre_ra);
  Tensor r = run_conv(RB, c.ha);
  for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] += c.y0.v[i];
  return r;
}

Tensor ToyAE::decode_bypass(const Tensor& z, const Encoded& skips) const {
  BypassCache c;
  return decode_bypass_cached(z, skips, c);
}

ToyAE::BypassGrads ToyAE::decode_bypass_backward(const Tensor& dout, const BypassCache& c,
                                                 std::vector<double>& grads) const {
  const Encoded& skips = *c.skips;

  // Residual block: out = y0 + RB(act(RA(y0))).
  Tensor dha(c.ha.c, c.ha.h, c.ha.w);
  back_conv(RB, c.ha, dout, &dha, grads);
  Tensor dpre_ra(c.pre_ra.c, c.pre_ra.h, c.pre_ra.w);
  nn::act_backward(c.pre_ra, dha, dpre_ra);
  Tensor dy0 = dout;  // identity path
  back_conv(RA, c.y0, dpre_ra, &dy0, grads);

  Tensor ds1(c.s1.c, c.s1.h, c.s1.w);
  back_conv(OUT, c.s1, dy0, &ds1, grads);

  BypassGrads out;
  out.dz1 = Tensor(skips.z1.c, skips.z1.h, skips.z1.w);
  back_conv(F1, skips.z1, ds1, &out.dz1, grads);

  Tensor dpre1(c.base.pre_d1.c, c.base.pre_d1.h, c.base.pre_d1.w);
  nn::act_backward(c.base.pre_d1, ds1, dpre1);
  Tensor du1(c.base.u1.c, c.base.u1.h, c.base.u1.w);
  back_conv(D1, c.base.u1, dpre1, &du1, grads);
  Tensor ds2(c.s2.c, c.s2.h, c.s2.w);
  nn::upsample2_backward(du1, ds2);

  out.dz2 = Tensor(skips.z2.c, skips.z2.h, skips.z2.w);
  back_conv(F2, skips.z2, ds2, &out.dz2, grads);

  Tensor dpre2(c.base.pre_d2.c, c.base.pre_d2.h, c.base.pre_d2.w);
  nn::act_backward(c.base.pre_d2, ds2, dpre2);
  Tensor du2(c.base.u2.c, c.base.u2.h, c.base.u2.w);
  back_conv(D2, c.base.u2, dpre2, &du2, grads);
  Tensor ds3(c.s3.c, c.s3.h, c.s3.w);
  nn::upsample2_backward(du2, ds3);

  out.dz3 = Tensor(skips.z3.c, skips.z3.h, skips.z3.w);
  back_conv(F3, skips.z3, ds3, &out.dz3, grads);

  Tensor dpre3(c.base.pre_d3.c, c.base.pre_d3.h, c.base.pre_d3.w);
  nn::act_backward(c.base.pre_d3, ds3, dpre3);
  Tensor du3(c.base.u3.c, c.base.u3.h, c.base.u3.w);
  back_conv(D3, c.base.u3, dpre3, &du3, grads);
  out.dz = Tensor(c.base.z.c, c.base.z.h, c.base.z.w);
  nn::upsample2_backward(du3, out.dz);
  return out;
}

void ToyAE::save(const std::string& path) const {
  json header{{"kind", "toyae"}, {"widths", widths_}, {"seed", seed_}};
  std::string head = header.dump();
  head.push_back('\n');

  ImageF blob(static_cast<int>(params_.size()), 1, 1);
  for (std::size_t i = 0; i < params_.size(); ++i) blob.data[i] = static_cast<float>(params_[i]);
  auto qpt = encode_qpt(blob);

  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  bytes.insert(bytes.end(), qpt.begin(), qpt.end());
  atomic_write_file(path, bytes.data(), bytes.size());
}

ToyAE ToyAE::load(const std::string& path) {
  auto bytes = read_file_bytes(path);
  auto nl = std::find(bytes.begin(), bytes.end(), static_cast<std::uint8_t>('\n'));
  if (nl == bytes.end()) throw io_error("ToyAE::load: missing header in '" + path + "'");
  json header = json::parse(std::string(bytes.begin(), nl));
  if (header.value("kind", "") != "toyae")
    throw io_error("ToyAE::load: '" + path + "' is not a toyae checkpoint");

  ToyAE ae(header.at("widths").get<std::vector<int>>(), header.at("seed").get<std::uint64_t>());
  ImageF blob = decode_qpt(std::vector<std::uint8_t>(nl + 1, bytes.end()), path);
  if (blob.data.size() != ae.params_.size())
    throw io_error("ToyAE::load: parameter blob size mismatch in '" + path + "'");
  for (std::size_t i = 0; i < blob.data.size(); ++i) ae.params_[i] = blob.data[i];
  return ae;
}

}  // namespace qp
