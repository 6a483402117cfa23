// Copyright 2026 The even authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVEN_FUSION_HPP
#define EVEN_FUSION_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "even/io.hpp"
#include "even/nn.hpp"
#include "even/params.hpp"
#include "even/synthcam.hpp"
#include "even/tensor.hpp"

namespace even {

struct FusionConfig {
  int channels = 32;      // C
  int compact_dim = 16;   // d
  double beta = 0.8;      // joint-loss mix
  double lr = 1e-3;
  double weight_decay = 1e-3;
  int scheduler_step = 5;
  double scheduler_factor = 0.5;
  int epochs = 100;
  std::uint64_t seed = 1;

  void validate() const {
    if (channels < 1) throw std::invalid_argument("FusionConfig: channels < 1");
    if (compact_dim < 1) throw std::invalid_argument("FusionConfig: compact_dim < 1");
    if (beta < 0.0 || beta > 1.0)
      throw std::invalid_argument("FusionConfig: beta outside [0,1]");
  }
};

/// Map [0,1] images to the [-1,1] convention the branch convs expect, and back.
inline Tensor<float> to_signed(const Tensor<float>& img01) {
  Tensor<float> out = img01;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = 2.0f * out[i] - 1.0f;
  return out;
}

inline Tensor<float> to_unit(const Tensor<float>& img_signed) {
  Tensor<float> out = img_signed;
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = std::clamp(0.5f * (out[i] + 1.0f), 0.0f, 1.0f);
  return out;
}

/// beta * MSE(fusion, enhanced) + (1 - beta) * MSE(fusion, event).
/// When grad != nullptr, the gradient w.r.t. the fusion image is written there.
template <typename T>
double joint_loss(const Tensor<T>& fusion, const Tensor<T>& enhanced,
                  const Tensor<T>& event, double beta, Tensor<T>* grad = nullptr) {
  if (!fusion.same_shape(enhanced) || !fusion.same_shape(event))
    throw std::invalid_argument("joint_loss: shape mismatch");
  if (beta < 0.0 || beta > 1.0)
    throw std::invalid_argument("joint_loss: beta outside [0,1]");
  const double inv_n = 1.0 / static_cast<double>(fusion.numel());
  double mse_enh = 0.0, mse_ev = 0.0;
  for (std::int64_t i = 0; i < fusion.numel(); ++i) {
    const double de = static_cast<double>(fusion[i]) - enhanced[i];
    const double dv = static_cast<double>(fusion[i]) - event[i];
    mse_enh += de * de * inv_n;
    mse_ev += dv * dv * inv_n;
    if (grad)
      (*grad)[i] = static_cast<T>(2.0 * inv_n * (beta * de + (1.0 - beta) * dv));
  }
  return beta * mse_enh + (1.0 - beta) * mse_ev;
}

template <typename T>
struct FusionNet {
  int C = 32, d = 16;
  nn::Conv2d<T> conv_event, conv_rgb;  // 5x5 and 3x3 branch transforms
  nn::Linear<T> fc;                    // V -> k
  Tensor<T> attn_a, attn_b, g_attn_a, g_attn_b;  // C x d learnable vectors
  // depth-2 U-Net, widths (C, 2C), nearest-neighbor upsampling with skips
  nn::Conv2d<T> enc1, pool1, enc2, pool2, bottleneck, dec2, dec1;
  nn::Conv2d<T> head1, head2;  // Conv -> ReLU -> Conv reconstruction

  explicit FusionNet(const FusionConfig& cfg)
      : C(cfg.channels),
        d(cfg.compact_dim),
        conv_event(3, C, 5),
        conv_rgb(3, C, 3),
        fc(C, d),
        attn_a({C, d}),
        attn_b({C, d}),
        g_attn_a({C, d}),
        g_attn_b({C, d}),
        enc1(C, C, 3),
        pool1(C, 2 * C, 3, 2),
        enc2(2 * C, 2 * C, 3),
        pool2(2 * C, 2 * C, 3, 2),
        bottleneck(2 * C, 2 * C, 3),
        dec2(4 * C, 2 * C, 3),
        dec1(3 * C, C, 3),
        head1(C, C, 3),
        head2(C, 3, 3) {}

  void init(Rng& rng) {
    conv_event.init(rng);
    conv_rgb.init(rng);
    fc.init(rng);
    // sigma 0.1 keeps initial attention near 0.5/0.5
    for (std::int64_t i = 0; i < attn_a.numel(); ++i)
      attn_a[i] = static_cast<T>(normal(rng, 0.0, 0.1));
    for (std::int64_t i = 0; i < attn_b.numel(); ++i)
      attn_b[i] = static_cast<T>(normal(rng, 0.0, 0.1));
    enc1.init(rng);
    pool1.init(rng);
    enc2.init(rng);
    pool2.init(rng);
    bottleneck.init(rng);
    dec2.init(rng);
    dec1.init(rng);
    head1.init(rng);
    head2.init(rng);
  }

  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    conv_event.collect(out, "fusion.g");
    conv_rgb.collect(out, "fusion.h");
    fc.collect(out, "fusion.fc");
    out.push_back({"fusion.attn_a", &attn_a, &g_attn_a});
    out.push_back({"fusion.attn_b", &attn_b, &g_attn_b});
    enc1.collect(out, "fusion.unet.enc1");
    pool1.collect(out, "fusion.unet.pool1");
    enc2.collect(out, "fusion.unet.enc2");
    pool2.collect(out, "fusion.unet.pool2");
    bottleneck.collect(out, "fusion.unet.bottleneck");
    dec2.collect(out, "fusion.unet.dec2");
    dec1.collect(out, "fusion.unet.dec1");
    head1.collect(out, "fusion.head1");
    head2.collect(out, "fusion.head2");
    return out;
  }

  struct Cache {
    Tensor<T> f_event, f_enh;     // branch features
    Tensor<T> k;                  // compact vector
    Tensor<T> a, b;               // per-channel attention
    Tensor<T> fused;
    Tensor<T> u_e1, u_e1r, u_p1, u_p1r, u_e2, u_e2r, u_p2, u_p2r, u_b, u_br;
    Tensor<T> cat2, u_d2, u_d2r, cat1, u_d1, u_d1r;
    Tensor<T> h1, h1r;
  };

  void check_spatial(const Tensor<T>& x) const {
    if (x.rank() != 3 || x.dim(0) != 3)
      throw std::invalid_argument("FusionNet: inputs must be 3 x H x W");
    if (x.dim(1) % 4 != 0 || x.dim(2) % 4 != 0)
      throw std::invalid_argument(
          "FusionNet: spatial dims must be divisible by 4 (pad input to " +
          std::to_string((x.dim(1) + 3) / 4 * 4) + " x " +
          std::to_string((x.dim(2) + 3) / 4 * 4) + ")");
  }

  /// Eqs. 1-2: per-branch convolutional transforms.
  void branch_transform(const Tensor<T>& x_event, const Tensor<T>& x_enh, Cache& c) {
    check_spatial(x_event);
    if (!(x_event.shape() == x_enh.shape()))
      throw std::invalid_argument("FusionNet: branch inputs differ in shape");
    c.f_event = conv_event.forward(x_event);
    c.f_enh = conv_rgb.forward(x_enh);
  }

  /// Eqs. 3-5: element-wise merge, GAP, compact vector, two-way softmax.
  void attention_weights(Cache& c) {
    Tensor<T> sum = c.f_event;
    sum.add_scaled(c.f_enh, T(1));
    Tensor<T> v = nn::global_avg_pool(sum);
    c.k = fc.forward(v);
    c.a = Tensor<T>({C});
    c.b = Tensor<T>({C});
    for (int ch = 0; ch < C; ++ch) {
      T la = T(0), lb = T(0);
      for (int j = 0; j < d; ++j) {
        la += attn_a(ch, j) * c.k(j);
        lb += attn_b(ch, j) * c.k(j);
      }
      // stable two-way softmax: subtract the max logit
      const T m = std::max(la, lb);
      const T ea = std::exp(la - m), eb = std::exp(lb - m);
      c.a(ch) = ea / (ea + eb);
      c.b(ch) = eb / (ea + eb);
    }
  }

  /// Eq. 6: channel-wise convex combination of the branch features.
  void fuse_features(Cache& c) {
    const int h = c.f_event.dim(1), w = c.f_event.dim(2);
    c.fused = Tensor<T>({C, h, w});
    for (int ch = 0; ch < C; ++ch) {
      const T a = c.a(ch), b = c.b(ch);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          c.fused(ch, y, x) = a * c.f_event(ch, y, x) + b * c.f_enh(ch, y, x);
    }
  }

  /// Eq. 7: U-Net plus Conv -> ReLU -> Conv, same resolution as the input.
  Tensor<T> reconstruct(Cache& c) {
    c.u_e1 = enc1.forward(c.fused);
    c.u_e1r = nn::relu(c.u_e1);
    c.u_p1 = pool1.forward(c.u_e1r);
    c.u_p1r = nn::relu(c.u_p1);
    c.u_e2 = enc2.forward(c.u_p1r);
    c.u_e2r = nn::relu(c.u_e2);
    c.u_p2 = pool2.forward(c.u_e2r);
    c.u_p2r = nn::relu(c.u_p2);
    c.u_b = bottleneck.forward(c.u_p2r);
    c.u_br = nn::relu(c.u_b);
    c.cat2 = nn::concat_channels(nn::upsample2x(c.u_br), c.u_e2r);
    c.u_d2 = dec2.forward(c.cat2);
    c.u_d2r = nn::relu(c.u_d2);
    c.cat1 = nn::concat_channels(nn::upsample2x(c.u_d2r), c.u_e1r);
    c.u_d1 = dec1.forward(c.cat1);
    c.u_d1r = nn::relu(c.u_d1);
    c.h1 = head1.forward(c.u_d1r);
    c.h1r = nn::relu(c.h1);
    return head2.forward(c.h1r);
  }

  Tensor<T> forward(const Tensor<T>& x_event, const Tensor<T>& x_enh, Cache& c) {
    branch_transform(x_event, x_enh, c);
    attention_weights(c);
    fuse_features(c);
    return reconstruct(c);
  }

  /// Accumulates parameter gradients given dLoss/dY.
  void backward(Cache& c, const Tensor<T>& gy) {
    Tensor<T> gh1 = nn::relu_backward(c.h1, head2.backward(gy));
    Tensor<T> gd1 = nn::relu_backward(c.u_d1, head1.backward(gh1));
    Tensor<T> gcat1 = dec1.backward(gd1);
    const int h = c.fused.dim(1), w = c.fused.dim(2);
    Tensor<T> gup1({2 * C, h, w}), ge1r_skip({C, h, w});
    nn::split_channels(gcat1, gup1, ge1r_skip);
    Tensor<T> gd2 = nn::relu_backward(c.u_d2, nn::upsample2x_backward(gup1));
    Tensor<T> gcat2 = dec2.backward(gd2);
    Tensor<T> gup2({2 * C, h / 2, w / 2}), ge2r_skip({2 * C, h / 2, w / 2});
    nn::split_channels(gcat2, gup2, ge2r_skip);
    Tensor<T> gb = nn::relu_backward(c.u_b, nn::upsample2x_backward(gup2));
    Tensor<T> gp2 = nn::relu_backward(c.u_p2, bottleneck.backward(gb));
    Tensor<T> ge2r = pool2.backward(gp2);
    ge2r.add_scaled(ge2r_skip, T(1));
    Tensor<T> ge2 = nn::relu_backward(c.u_e2, ge2r);
    Tensor<T> gp1 = nn::relu_backward(c.u_p1, enc2.backward(ge2));
    Tensor<T> ge1r = pool1.backward(gp1);
    ge1r.add_scaled(ge1r_skip, T(1));
    Tensor<T> gfused = enc1.backward(nn::relu_backward(c.u_e1, ge1r));

    // through Eq. 6 into branch features and attention logits
    Tensor<T> gf_event = Tensor<T>({C, h, w});
    Tensor<T> gf_enh = Tensor<T>({C, h, w});
    Tensor<T> gk({d});
    for (int ch = 0; ch < C; ++ch) {
      const T a = c.a(ch), b = c.b(ch);
      T da = T(0), db = T(0);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const T g = gfused(ch, y, x);
          gf_event(ch, y, x) = a * g;
          gf_enh(ch, y, x) = b * g;
          da += g * c.f_event(ch, y, x);
          db += g * c.f_enh(ch, y, x);
        }
      const T dla = (da - db) * a * b;  // two-way softmax jacobian
      for (int j = 0; j < d; ++j) {
        g_attn_a(ch, j) += dla * c.k(j);
        g_attn_b(ch, j) += -dla * c.k(j);
        gk(j) += dla * (attn_a(ch, j) - attn_b(ch, j));
      }
    }
    Tensor<T> gv = fc.backward(gk);
    Tensor<T> gsum = nn::global_avg_pool_backward(gv, h, w);
    gf_event.add_scaled(gsum, T(1));
    gf_enh.add_scaled(gsum, T(1));
    conv_event.backward(gf_event);
    conv_rgb.backward(gf_enh);
  }
};

/// Result of running the fusion net on one input pair.
struct FusionOutput {
  Tensor<float> fused_feature;  // C x H x W
  Tensor<float> fusion_image;   // 3 x H x W, signed convention
  Tensor<float> attention_a, attention_b;
};

inline FusionOutput fuse(const Tensor<float>& x_event, const Tensor<float>& x_enh,
                         FusionNet<float>& net) {
  typename FusionNet<float>::Cache cache;
  Tensor<float> y = net.forward(x_event, x_enh, cache);
  FusionOutput out;
  out.fused_feature = cache.fused;
  out.fusion_image = std::move(y);
  out.attention_a = cache.a;
  out.attention_b = cache.b;
  return out;
}

/// Produces (event-branch input, rgb-branch input) in [-1,1] for one sample.
using PairLoader =
    std::function<std::pair<Tensor<float>, Tensor<float>>(const DatasetManifest&,
                                                          const ManifestEntry&)>;

struct FusionTrainResult {
  NamedTensors params;
  std::vector<double> epoch_loss;
};

inline FusionTrainResult train_fusion(const DatasetManifest& manifest, Split split,
                                      const FusionConfig& cfg,
                                      const PairLoader& loader) {
  cfg.validate();
  const auto entries = manifest.split_entries(split);
  if (entries.empty()) throw std::invalid_argument("train_fusion: empty split");

  Rng rng = make_rng(cfg.seed);
  FusionNet<float> net(cfg);
  net.init(rng);
  auto refs = net.params();
  nn::AdamW<float> opt(refs);
  opt.weight_decay = cfg.weight_decay;

  FusionTrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.lr = nn::step_lr(cfg.lr, epoch, cfg.scheduler_step, cfg.scheduler_factor);
    double total = 0.0;
    for (const auto& e : entries) {
      auto [x_event, x_enh] = loader(manifest, e);
      typename FusionNet<float>::Cache cache;
      Tensor<float> y = net.forward(x_event, x_enh, cache);
      Tensor<float> gy = Tensor<float>::zeros_like(y);
      total += joint_loss(y, x_enh, x_event, cfg.beta, &gy);
      nn::zero_grads(refs);
      net.backward(cache, gy);
      opt.step();
      for (auto& r : refs)
        if (!r.value->all_finite())
          throw std::runtime_error("train_fusion: non-finite parameter " + r.name);
    }
    result.epoch_loss.push_back(total / static_cast<double>(entries.size()));
  }
  result.params = export_params(refs);
  return result;
}

/// Writes one fusion image per manifest sample as <stem>.png in the sample
/// dir (signed outputs mapped back to [0,1] and clamped). Deterministic for
/// fixed params.
inline void export_fusion_images(const DatasetManifest& manifest,
                                 const NamedTensors& params, const FusionConfig& cfg,
                                 const PairLoader& loader, const std::string& stem) {
  FusionNet<float> net(cfg);
  import_params(net.params(), params);
  std::vector<std::string> failures;
  for (const auto& e : manifest.entries) {
    try {
      auto [x_event, x_enh] = loader(manifest, e);
      FusionOutput out = fuse(x_event, x_enh, net);
      save_png(manifest.sample_dir(e) + "/" + stem + ".png", to_unit(out.fusion_image));
    } catch (const std::exception& ex) {
      failures.push_back(e.id + ": " + ex.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = "export_fusion_images: " +
                      std::to_string(failures.size()) + " sample(s) failed:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw std::runtime_error(msg);
  }
}

}  // namespace even

#endif  // EVEN_FUSION_HPP
