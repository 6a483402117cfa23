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

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "even/enhance.hpp"
#include "even/synthcam.hpp"

using namespace even;
namespace fs = std::filesystem;

namespace {

std::string temp_dataset(const std::string& name, int n) {
  DatasetConfig cfg;
  cfg.n_samples = n;
  cfg.width = 32;
  cfg.height = 32;
  cfg.seed = 17;
  cfg.out_dir = (fs::temp_directory_path() / name).string();
  fs::remove_all(cfg.out_dir);
  generate_dataset(cfg);
  return cfg.out_dir;
}

}  // namespace

TEST_CASE("illumination channel and attention map") {
  Tensor<float> rgb({3, 1, 3});
  // white pixel
  rgb(0, 0, 0) = 1.0f;
  rgb(1, 0, 0) = 1.0f;
  rgb(2, 0, 0) = 1.0f;
  // black pixel stays 0
  // (0.2, 0.5, 0.1) pixel
  rgb(0, 0, 2) = 0.2f;
  rgb(1, 0, 2) = 0.5f;
  rgb(2, 0, 2) = 0.1f;
  const auto v = illumination_channel(rgb);
  REQUIRE(v(0, 0) == 1.0f);
  REQUIRE(v(0, 1) == 0.0f);
  REQUIRE(v(0, 2) == 0.5f);
  const auto att = attention_map(rgb);
  REQUIRE(att(0, 0) == 0.0f);
  REQUIRE(att(0, 1) == 1.0f);
  REQUIRE(att(0, 2) == 0.5f);
}

TEST_CASE("analytic enhancement matches the scalar oracle") {
  // pixel 0.1 in all channels: V = 0.1, attention 0.9,
  // out = 0.1 + 0.9 (0.1^(1/2.2) - 0.1) ~ 0.3260
  Tensor<float> rgb({3, 1, 1});
  rgb.fill(0.1f);
  const auto out = enhance_analytic(rgb, 2.2);
  const double expected = 0.1 + 0.9 * (std::pow(0.1, 1.0 / 2.2) - 0.1);
  REQUIRE(out(0, 0, 0) == Catch::Approx(expected).margin(1e-5));
  REQUIRE(expected == Catch::Approx(0.3260).margin(5e-4));
}

TEST_CASE("analytic enhancement: identity on fully bright, black stays black") {
  Tensor<float> bright({3, 2, 2});
  bright.fill(1.0f);
  const auto same = enhance_analytic(bright, 2.2);
  for (std::int64_t i = 0; i < same.numel(); ++i) REQUIRE(same[i] == 1.0f);
  Tensor<float> black({3, 2, 2});
  const auto still = enhance_analytic(black, 2.2);
  for (std::int64_t i = 0; i < still.numel(); ++i) REQUIRE(still[i] == 0.0f);
}

TEST_CASE("analytic enhancement is monotone non-decreasing and in range") {
  Rng rng = make_rng(3);
  Tensor<float> rgb({3, 8, 8});
  for (std::int64_t i = 0; i < rgb.numel(); ++i)
    rgb[i] = static_cast<float>(uniform(rng, 0.0, 1.0));
  const auto out = enhance_analytic(rgb, 2.2);
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    REQUIRE(out[i] >= rgb[i] - 1e-6f);
    REQUIRE(out[i] >= 0.0f);
    REQUIRE(out[i] <= 1.0f);
  }
}

TEST_CASE("enhance dispatcher validates config") {
  Tensor<float> rgb({3, 4, 4});
  EnhancerConfig cfg;
  cfg.gamma_target = -1.0;
  REQUIRE_THROWS_AS(enhance(rgb, cfg, nullptr), std::invalid_argument);
  cfg = EnhancerConfig{};
  cfg.kind = EnhancerKind::attention_unet;
  // trainable mode requires parameters
  REQUIRE_THROWS(enhance(rgb, cfg, nullptr));
}

TEST_CASE("attention unet output is clipped and shape-preserving") {
  Rng rng = make_rng(8);
  AttentionUnet<float> net(4);
  net.init(rng);
  Tensor<float> rgb({3, 16, 16});
  for (std::int64_t i = 0; i < rgb.numel(); ++i)
    rgb[i] = static_cast<float>(uniform(rng, 0.0, 1.0));
  typename AttentionUnet<float>::Cache cache;
  const auto out = net.forward(rgb, cache);
  REQUIRE(out.same_shape(rgb));
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    REQUIRE(out[i] >= 0.0f);
    REQUIRE(out[i] <= 1.0f);
  }
}

TEST_CASE("attention unet gradients match finite differences (float64)") {
  Rng rng = make_rng(15);
  AttentionUnet<double> net(2);
  net.init(rng);
  Tensor<double> rgb({3, 8, 8});
  for (std::int64_t i = 0; i < rgb.numel(); ++i)
    rgb[i] = uniform(rng, 0.05, 0.95);
  Tensor<double> target({3, 8, 8});
  for (std::int64_t i = 0; i < target.numel(); ++i)
    target[i] = uniform(rng, 0.05, 0.95);

  auto refs = net.params();
  auto objective = [&]() {
    typename AttentionUnet<double>::Cache cache;
    const auto out = net.forward(rgb, cache);
    double s = 0.0;
    for (std::int64_t i = 0; i < out.numel(); ++i) {
      const double d = out[i] - target[i];
      s += d * d;
    }
    return s / static_cast<double>(out.numel());
  };

  typename AttentionUnet<double>::Cache cache;
  const auto out = net.forward(rgb, cache);
  Tensor<double> gout({3, 8, 8});
  for (std::int64_t i = 0; i < gout.numel(); ++i)
    gout[i] = 2.0 * (out[i] - target[i]) / static_cast<double>(out.numel());
  nn::zero_grads(refs);
  net.backward(cache, gout);

  Rng pick = make_rng(4);
  const double eps = 1e-5;
  for (const auto& r : refs) {
    // sample a handful of coordinates per parameter tensor
    for (int trial = 0; trial < 6; ++trial) {
      const std::int64_t i = uniform_int(pick, 0, static_cast<int>(r.value->numel()) - 1);
      const double keep = (*r.value)[i];
      (*r.value)[i] = keep + eps;
      const double hi = objective();
      (*r.value)[i] = keep - eps;
      const double lo = objective();
      (*r.value)[i] = keep;
      const double fd = (hi - lo) / (2 * eps);
      const double an = (*r.grad)[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-7});
      INFO(r.name << "[" << i << "] fd=" << fd << " an=" << an);
      REQUIRE(std::abs(fd - an) / denom < 1e-4);
    }
  }
}

TEST_CASE("train_enhancer: analytic mode unsupported, trainable mode learns") {
  const std::string root = temp_dataset("even_enh_ds", 10);
  const auto manifest = load_manifest(root);

  EnhancerConfig analytic;
  REQUIRE_THROWS(train_enhancer(manifest, Split::train, analytic));

  EnhancerConfig cfg;
  cfg.kind = EnhancerKind::attention_unet;
  cfg.unet_channels = 4;
  cfg.epochs = 2;
  cfg.seed = 5;
  const auto r1 = train_enhancer(manifest, Split::train, cfg);
  REQUIRE(r1.epoch_loss.size() == 2);
  REQUIRE(r1.epoch_loss.back() < r1.epoch_loss.front());

  // determinism: same seed, same parameters and history
  const auto r2 = train_enhancer(manifest, Split::train, cfg);
  REQUIRE(r1.epoch_loss == r2.epoch_loss);
  REQUIRE(r1.params.size() == r2.params.size());
  for (const auto& [name, t] : r1.params) {
    const auto& u = r2.params.at(name);
    for (std::int64_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == u[i]);
  }

  // zero-epoch training returns the initialization
  EnhancerConfig zero = cfg;
  zero.epochs = 0;
  const auto rz = train_enhancer(manifest, Split::train, zero);
  Rng rng = make_rng(zero.seed);
  AttentionUnet<float> init(zero.unet_channels);
  init.init(rng);
  const auto init_params = export_params(init.params());
  for (const auto& [name, t] : rz.params) {
    const auto& u = init_params.at(name);
    for (std::int64_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == u[i]);
  }
  fs::remove_all(root);
}
