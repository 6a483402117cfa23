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

#ifndef EVEN_ENHANCE_HPP
#define EVEN_ENHANCE_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "even/io.hpp"
#include "even/nn.hpp"
#include "even/params.hpp"
#include "even/synthcam.hpp"
#include "even/tensor.hpp"

namespace even {

enum class EnhancerKind { analytic, attention_unet };

struct EnhancerConfig {
  EnhancerKind kind = EnhancerKind::analytic;
  double gamma_target = 2.2;  // analytic mode
  int unet_channels = 8;      // trainable mode
  // trainable-mode optimizer settings
  int epochs = 5;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::uint64_t seed = 1;

  void validate() const {
    if (gamma_target <= 0.0)
      throw std::invalid_argument("EnhancerConfig: gamma_target <= 0");
    if (unet_channels < 1)
      throw std::invalid_argument("EnhancerConfig: unet_channels < 1");
  }
};

/// V channel of HSV: per-pixel max over the three channels. The attention map
/// is 1 - V, so dark regions get full weight.
inline Tensor<float> illumination_channel(const Tensor<float>& rgb) {
  const int h = rgb.dim(1), w = rgb.dim(2);
  Tensor<float> v({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      v(y, x) = std::max({rgb(0, y, x), rgb(1, y, x), rgb(2, y, x)});
  return v;
}

inline Tensor<float> attention_map(const Tensor<float>& rgb) {
  Tensor<float> att = illumination_channel(rgb);
  for (std::int64_t i = 0; i < att.numel(); ++i) att[i] = 1.0f - att[i];
  return att;
}

/// Analytic mode: out = rgb + att * (rgb^(1/gamma) - rgb), per channel with a
/// shared attention map. Identity on fully bright images, fixed at 0 and 1.
inline Tensor<float> enhance_analytic(const Tensor<float>& rgb, double gamma_target) {
  if (gamma_target <= 0.0) throw std::invalid_argument("enhance_analytic: gamma <= 0");
  const Tensor<float> att = attention_map(rgb);
  const double inv_gamma = 1.0 / gamma_target;
  Tensor<float> out = rgb;
  const int h = rgb.dim(1), w = rgb.dim(2);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = rgb(c, y, x);
        const double lifted = std::pow(v, inv_gamma);
        out(c, y, x) =
            static_cast<float>(std::clamp(v + att(y, x) * (lifted - v), 0.0, 1.0));
      }
  return out;
}

// ---------------------------------------------------------------------------
// Trainable attention-gated U-Net: out = clip(rgb + att * residual(rgb), 0, 1)
// ---------------------------------------------------------------------------

template <typename T>
struct AttentionUnet {
  int ch = 8;
  nn::Conv2d<T> conv_in, down, mid, up_conv, head;

  explicit AttentionUnet(int channels = 8)
      : ch(channels),
        conv_in(3, channels, 3),
        down(channels, 2 * channels, 3, 2),
        mid(2 * channels, 2 * channels, 3),
        up_conv(3 * channels, channels, 3),
        head(channels, 3, 3) {}

  void init(Rng& rng) {
    conv_in.init(rng);
    down.init(rng);
    mid.init(rng);
    up_conv.init(rng);
    head.init(rng);
  }

  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    conv_in.collect(out, "enh.conv_in");
    down.collect(out, "enh.down");
    mid.collect(out, "enh.mid");
    up_conv.collect(out, "enh.up");
    head.collect(out, "enh.head");
    return out;
  }

  struct Cache {
    Tensor<T> x, a1, a1r, a2, a2r, a3, a3r, cat, a4, a4r, residual, att, pre_clip;
  };

  Tensor<T> forward(const Tensor<T>& rgb, Cache& c) {
    if (rgb.dim(1) % 2 != 0 || rgb.dim(2) % 2 != 0)
      throw std::invalid_argument("AttentionUnet: spatial dims must be even");
    c.x = rgb;
    c.att = Tensor<T>({rgb.dim(1), rgb.dim(2)});
    for (int y = 0; y < rgb.dim(1); ++y)
      for (int x = 0; x < rgb.dim(2); ++x)
        c.att(y, x) = T(1) - std::max({rgb(0, y, x), rgb(1, y, x), rgb(2, y, x)});

    c.a1 = conv_in.forward(rgb);
    c.a1r = nn::relu(c.a1);
    c.a2 = down.forward(c.a1r);
    c.a2r = nn::relu(c.a2);
    c.a3 = mid.forward(c.a2r);
    c.a3r = nn::relu(c.a3);
    c.cat = nn::concat_channels(nn::upsample2x(c.a3r), c.a1r);
    c.a4 = up_conv.forward(c.cat);
    c.a4r = nn::relu(c.a4);
    c.residual = head.forward(c.a4r);

    c.pre_clip = Tensor<T>({3, rgb.dim(1), rgb.dim(2)});
    Tensor<T> out = c.pre_clip;
    for (int ch3 = 0; ch3 < 3; ++ch3)
      for (int y = 0; y < rgb.dim(1); ++y)
        for (int x = 0; x < rgb.dim(2); ++x) {
          const T v = rgb(ch3, y, x) + c.att(y, x) * c.residual(ch3, y, x);
          c.pre_clip(ch3, y, x) = v;
          out(ch3, y, x) = std::clamp(v, T(0), T(1));
        }
    return out;
  }

  /// Backprop through the residual path only (the attention map is treated
  /// as a fixed gate, matching the phase-1 role of the illumination channel).
  void backward(const Cache& c, const Tensor<T>& gout) {
    Tensor<T> gres({3, c.x.dim(1), c.x.dim(2)});
    for (int ch3 = 0; ch3 < 3; ++ch3)
      for (int y = 0; y < c.x.dim(1); ++y)
        for (int x = 0; x < c.x.dim(2); ++x) {
          const T pc = c.pre_clip(ch3, y, x);
          const T g = (pc > T(0) && pc < T(1)) ? gout(ch3, y, x) : T(0);
          gres(ch3, y, x) = g * c.att(y, x);
        }
    Tensor<T> g4 = nn::relu_backward(c.a4, head.backward(gres));
    Tensor<T> gcat = up_conv.backward(g4);
    Tensor<T> gup({2 * ch, c.x.dim(1), c.x.dim(2)});
    Tensor<T> ga1r({ch, c.x.dim(1), c.x.dim(2)});
    nn::split_channels(gcat, gup, ga1r);
    Tensor<T> g3 = nn::relu_backward(c.a3, nn::upsample2x_backward(gup));
    Tensor<T> g2 = nn::relu_backward(c.a2, mid.backward(g3));
    ga1r.add_scaled(nn::relu_backward(c.a1, down.backward(g2)), T(1));
    // ga1r now carries both the skip and the encoder path
    conv_in.backward(nn::relu_backward(c.a1, ga1r));
  }
};

/// Applies the configured enhancer. Trainable mode needs `params` (from
/// train_enhancer or an EVNP file).
inline Tensor<float> enhance(const Tensor<float>& rgb, const EnhancerConfig& cfg,
                             const NamedTensors* params = nullptr) {
  cfg.validate();
  if (cfg.kind == EnhancerKind::analytic)
    return enhance_analytic(rgb, cfg.gamma_target);
  if (params == nullptr)
    throw std::invalid_argument("enhance: attention_unet mode needs trained params");
  AttentionUnet<float> net(cfg.unet_channels);
  import_params(net.params(), *params);
  typename AttentionUnet<float>::Cache cache;
  return net.forward(rgb, cache);
}

struct TrainResult {
  NamedTensors params;
  std::vector<double> epoch_loss;
};

/// Supervised substitute for adversarial enhancement training: regresses the
/// clean frame from the night frame with an L2 loss over the given split.
inline TrainResult train_enhancer(const DatasetManifest& manifest, Split split,
                                  const EnhancerConfig& cfg) {
  cfg.validate();
  if (cfg.kind != EnhancerKind::attention_unet)
    throw std::runtime_error("train_enhancer: unsupported for analytic enhancer");
  const auto entries = manifest.split_entries(split);
  if (entries.empty()) throw std::invalid_argument("train_enhancer: empty split");

  Rng rng = make_rng(cfg.seed);
  AttentionUnet<float> net(cfg.unet_channels);
  net.init(rng);
  auto refs = net.params();
  nn::AdamW<float> opt(refs);
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& e : entries) {
      const Tensor<float> night = load_png(manifest.sample_dir(e) + "/rgb.png");
      const Tensor<float> clean = load_png(manifest.sample_dir(e) + "/clean.png");
      typename AttentionUnet<float>::Cache cache;
      Tensor<float> out = net.forward(night, cache);
      Tensor<float> gout({3, out.dim(1), out.dim(2)});
      double loss = 0.0;
      const double inv_n = 1.0 / static_cast<double>(out.numel());
      for (std::int64_t i = 0; i < out.numel(); ++i) {
        const double d = static_cast<double>(out[i]) - clean[i];
        loss += d * d * inv_n;
        gout[i] = static_cast<float>(2.0 * d * inv_n);
      }
      nn::zero_grads(refs);
      net.backward(cache, gout);
      opt.step();
      total += loss;
    }
    result.epoch_loss.push_back(total / static_cast<double>(entries.size()));
  }
  result.params = export_params(refs);
  return result;
}

}  // namespace even

#endif  // EVEN_ENHANCE_HPP
