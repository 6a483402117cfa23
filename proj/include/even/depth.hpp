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

#ifndef EVEN_DEPTH_HPP
#define EVEN_DEPTH_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "even/io.hpp"
#include "even/nn.hpp"
#include "even/params.hpp"
#include "even/synthcam.hpp"
#include "even/tensor.hpp"

namespace even {

/// The seven input pipelines of the baseline matrix.
enum class InputKind {
  rgb,
  event,
  rgb_sobel,       // fused rgb + sobel edges
  rgb_event,       // fused rgb + event frame
  enhanced,
  enhanced_sobel,  // fused enhanced rgb + sobel edges
  even,            // the full pipeline's fusion image
};

inline std::string to_string(InputKind k) {
  switch (k) {
    case InputKind::rgb: return "rgb";
    case InputKind::event: return "event";
    case InputKind::rgb_sobel: return "rgb+sobel";
    case InputKind::rgb_event: return "rgb+event";
    case InputKind::enhanced: return "enhanced";
    case InputKind::enhanced_sobel: return "enhanced+sobel";
    case InputKind::even: return "even";
  }
  throw std::logic_error("bad InputKind");
}

inline InputKind input_kind_from_string(const std::string& s) {
  for (InputKind k : {InputKind::rgb, InputKind::event, InputKind::rgb_sobel,
                      InputKind::rgb_event, InputKind::enhanced,
                      InputKind::enhanced_sobel, InputKind::even})
    if (to_string(k) == s) return k;
  throw std::invalid_argument(
      "unknown input kind '" + s +
      "' (want rgb, event, rgb+sobel, rgb+event, enhanced, enhanced+sobel, even)");
}

inline const std::vector<InputKind>& all_input_kinds() {
  static const std::vector<InputKind> kinds = {
      InputKind::rgb,      InputKind::event,          InputKind::rgb_sobel,
      InputKind::rgb_event, InputKind::enhanced,      InputKind::enhanced_sobel,
      InputKind::even};
  return kinds;
}

struct DepthMap {
  Tensor<float> data;               // H x W meters
  Tensor<std::uint8_t> valid_mask;  // H x W, 1 = valid

  static DepthMap all_valid(Tensor<float> d) {
    DepthMap m;
    m.valid_mask = Tensor<std::uint8_t>({d.dim(0), d.dim(1)});
    m.valid_mask.fill(1);
    m.data = std::move(d);
    return m;
  }
};

struct DepthConfig {
  double d_min = 1.0, d_max = 20.0;
  double lr = 1e-4;
  double weight_decay = 1e-3;
  int epochs = 40;
  double si_lambda = 0.5;  // scale-invariant loss mix
  std::uint64_t seed = 1;

  void validate() const {
    if (!(d_min > 0.0 && d_min < d_max))
      throw std::invalid_argument("DepthConfig: bad depth range");
    if (epochs < 0) throw std::invalid_argument("DepthConfig: negative epochs");
  }
};

// ---------------------------------------------------------------------------
// ~110k-parameter encoder-decoder, depth 3, widths 16/32/64, with skips.
// Head: z -> d_min + (d_max - d_min) * softplus(z) / (1 + softplus(z)),
// strictly positive and inside the configured range.
// ---------------------------------------------------------------------------

template <typename T>
struct DepthNet {
  double d_min = 1.0, d_max = 20.0;
  nn::Conv2d<T> enc0, down1, down2, down3, dec3, dec2, dec1, head;

  explicit DepthNet(double dmin = 1.0, double dmax = 20.0)
      : d_min(dmin),
        d_max(dmax),
        enc0(3, 16, 3),
        down1(16, 32, 3, 2),
        down2(32, 64, 3, 2),
        down3(64, 64, 3, 2),
        dec3(128, 32, 3),
        dec2(64, 16, 3),
        dec1(32, 16, 3),
        head(16, 1, 3) {}

  void init(Rng& rng) {
    for (auto* c : layers()) c->init(rng);
  }

  std::vector<nn::Conv2d<T>*> layers() {
    return {&enc0, &down1, &down2, &down3, &dec3, &dec2, &dec1, &head};
  }

  std::vector<nn::ParamRef<T>> params() {
    static const char* names[] = {"depth.enc0", "depth.down1", "depth.down2",
                                  "depth.down3", "depth.dec3", "depth.dec2",
                                  "depth.dec1", "depth.head"};
    std::vector<nn::ParamRef<T>> out;
    int i = 0;
    for (auto* c : layers()) c->collect(out, names[i++]);
    return out;
  }

  struct Cache {
    Tensor<T> e0, e0r, d1, d1r, d2, d2r, d3, d3r;
    Tensor<T> cat3, u3, u3r, cat2, u2, u2r, cat1, u1, u1r;
    Tensor<T> z;  // pre-activation head output
  };

  Tensor<T> forward(const Tensor<T>& x, Cache& c) {
    if (x.rank() != 3 || x.dim(0) != 3)
      throw std::invalid_argument("DepthNet: input must be 3 x H x W");
    if (x.dim(1) % 8 != 0 || x.dim(2) % 8 != 0)
      throw std::invalid_argument("DepthNet: spatial dims must be divisible by 8");
    c.e0 = enc0.forward(x);
    c.e0r = nn::relu(c.e0);
    c.d1 = down1.forward(c.e0r);
    c.d1r = nn::relu(c.d1);
    c.d2 = down2.forward(c.d1r);
    c.d2r = nn::relu(c.d2);
    c.d3 = down3.forward(c.d2r);
    c.d3r = nn::relu(c.d3);
    c.cat3 = nn::concat_channels(nn::upsample2x(c.d3r), c.d2r);
    c.u3 = dec3.forward(c.cat3);
    c.u3r = nn::relu(c.u3);
    c.cat2 = nn::concat_channels(nn::upsample2x(c.u3r), c.d1r);
    c.u2 = dec2.forward(c.cat2);
    c.u2r = nn::relu(c.u2);
    c.cat1 = nn::concat_channels(nn::upsample2x(c.u2r), c.e0r);
    c.u1 = dec1.forward(c.cat1);
    c.u1r = nn::relu(c.u1);
    c.z = head.forward(c.u1r);

    Tensor<T> pred({x.dim(1), x.dim(2)});
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
      const double sp = nn::softplus(static_cast<double>(c.z[i]));
      pred[i] = static_cast<T>(d_min + (d_max - d_min) * sp / (1.0 + sp));
    }
    return pred;
  }

  void backward(Cache& c, const Tensor<T>& gpred) {
    Tensor<T> gz({1, c.z.dim(1), c.z.dim(2)});
    for (std::int64_t i = 0; i < gpred.numel(); ++i) {
      const double z = static_cast<double>(c.z[i]);
      const double sp = nn::softplus(z);
      const double dsp = nn::sigmoid(z);
      const double dhead = (d_max - d_min) * dsp / ((1.0 + sp) * (1.0 + sp));
      gz[i] = static_cast<T>(static_cast<double>(gpred[i]) * dhead);
    }
    Tensor<T> gu1 = nn::relu_backward(c.u1, head.backward(gz));
    Tensor<T> gcat1 = dec1.backward(gu1);
    const int h = c.e0.dim(1), w = c.e0.dim(2);
    Tensor<T> gup1({16, h, w}), ge0r_skip({16, h, w});
    nn::split_channels(gcat1, gup1, ge0r_skip);
    Tensor<T> gu2 = nn::relu_backward(c.u2, nn::upsample2x_backward(gup1));
    Tensor<T> gcat2 = dec2.backward(gu2);
    Tensor<T> gup2({32, h / 2, w / 2}), gd1r_skip({32, h / 2, w / 2});
    nn::split_channels(gcat2, gup2, gd1r_skip);
    Tensor<T> gu3 = nn::relu_backward(c.u3, nn::upsample2x_backward(gup2));
    Tensor<T> gcat3 = dec3.backward(gu3);
    Tensor<T> gup3({64, h / 4, w / 4}), gd2r_skip({64, h / 4, w / 4});
    nn::split_channels(gcat3, gup3, gd2r_skip);
    Tensor<T> gd3 = nn::relu_backward(c.d3, nn::upsample2x_backward(gup3));
    Tensor<T> gd2r = down3.backward(gd3);
    gd2r.add_scaled(gd2r_skip, T(1));
    Tensor<T> gd2 = nn::relu_backward(c.d2, gd2r);
    Tensor<T> gd1r = down2.backward(gd2);
    gd1r.add_scaled(gd1r_skip, T(1));
    Tensor<T> gd1 = nn::relu_backward(c.d1, gd1r);
    Tensor<T> ge0r = down1.backward(gd1);
    ge0r.add_scaled(ge0r_skip, T(1));
    enc0.backward(nn::relu_backward(c.e0, ge0r));
  }
};

inline DepthMap predict_depth(const Tensor<float>& image, DepthNet<float>& net) {
  typename DepthNet<float>::Cache cache;
  return DepthMap::all_valid(net.forward(image, cache));
}

/// Scale-invariant log loss: mean(e^2) - lambda * mean(e)^2 over valid pixels,
/// e = log(pred) - log(gt). Optionally writes dLoss/dpred.
template <typename T>
double depth_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                  const Tensor<std::uint8_t>& valid, double lambda = 0.5,
                  Tensor<T>* grad = nullptr) {
  if (!pred.same_shape(gt))
    throw std::invalid_argument("depth_loss: shape mismatch");
  std::int64_t n = 0;
  double sum_e = 0.0, sum_e2 = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    if (!valid[i]) continue;
    const double e = std::log(static_cast<double>(pred[i])) -
                     std::log(static_cast<double>(gt[i]));
    sum_e += e;
    sum_e2 += e * e;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("depth_loss: empty valid mask");
  const double mean_e = sum_e / n;
  if (grad) {
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
      if (!valid[i]) {
        (*grad)[i] = T(0);
        continue;
      }
      const double e = std::log(static_cast<double>(pred[i])) -
                       std::log(static_cast<double>(gt[i]));
      (*grad)[i] = static_cast<T>(2.0 / n * (e - lambda * mean_e) /
                                  static_cast<double>(pred[i]));
    }
  }
  return sum_e2 / n - lambda * mean_e * mean_e;
}

/// Valid pixels are those with gt inside the open range (d_min, d_max);
/// both maps are clamped into [d_min, d_max] before the log.
inline Tensor<std::uint8_t> range_mask(const Tensor<float>& gt, double d_min,
                                       double d_max) {
  Tensor<std::uint8_t> mask({gt.dim(0), gt.dim(1)});
  for (std::int64_t i = 0; i < gt.numel(); ++i)
    mask[i] = (gt[i] > d_min && gt[i] < d_max) ? 1 : 0;
  return mask;
}

template <typename T>
Tensor<T> clamp_depth(const Tensor<T>& d, double d_min, double d_max) {
  Tensor<T> out = d;
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = static_cast<T>(std::clamp(static_cast<double>(out[i]), d_min, d_max));
  return out;
}

/// Produces the network input (3 x H x W, in [-1,1]) for one sample.
using InputLoader =
    std::function<Tensor<float>(const DatasetManifest&, const ManifestEntry&)>;

struct DepthTrainResult {
  NamedTensors params;
  std::vector<double> epoch_loss;
};

inline DepthTrainResult train_depth(const DatasetManifest& manifest, Split split,
                                    const DepthConfig& cfg,
                                    const InputLoader& loader) {
  cfg.validate();
  const auto entries = manifest.split_entries(split);
  if (entries.empty()) throw std::invalid_argument("train_depth: empty split");

  Rng rng = make_rng(cfg.seed);
  DepthNet<float> net(cfg.d_min, cfg.d_max);
  net.init(rng);
  auto refs = net.params();
  nn::AdamW<float> opt(refs);
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;

  DepthTrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& e : entries) {
      const Tensor<float> x = loader(manifest, e);
      Tensor<float> gt = clamp_depth(load_depth(manifest.sample_dir(e) + "/depth.dpt"),
                                     cfg.d_min, cfg.d_max);
      typename DepthNet<float>::Cache cache;
      Tensor<float> pred = net.forward(x, cache);
      Tensor<std::uint8_t> mask({gt.dim(0), gt.dim(1)});
      mask.fill(1);  // training supervises every pixel of the clamped gt
      Tensor<float> gpred = Tensor<float>::zeros_like(pred);
      total += depth_loss(pred, gt, mask, cfg.si_lambda, &gpred);
      nn::zero_grads(refs);
      net.backward(cache, gpred);
      opt.step();
      for (auto& r : refs)
        if (!r.value->all_finite())
          throw std::runtime_error("train_depth: non-finite parameter " + r.name);
    }
    result.epoch_loss.push_back(total / static_cast<double>(entries.size()));
  }
  result.params = export_params(refs);
  return result;
}

}  // namespace even

#endif  // EVEN_DEPTH_HPP
