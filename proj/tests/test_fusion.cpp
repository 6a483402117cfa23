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

#include "even/fusion.hpp"
#include "even/io.hpp"
#include "even/synthcam.hpp"

using namespace even;
namespace fs = std::filesystem;

namespace {

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

FusionConfig tiny_config() {
  FusionConfig cfg;
  cfg.channels = 4;
  cfg.compact_dim = 3;
  cfg.seed = 11;
  return cfg;
}

std::string temp_dataset(const std::string& name, int n) {
  DatasetConfig cfg;
  cfg.n_samples = n;
  cfg.width = 32;
  cfg.height = 32;
  cfg.seed = 23;
  cfg.out_dir = (fs::temp_directory_path() / name).string();
  fs::remove_all(cfg.out_dir);
  generate_dataset(cfg);
  return cfg.out_dir;
}

// event/rgb pair loader reading the stored files directly
std::pair<Tensor<float>, Tensor<float>> raw_pair(const DatasetManifest& m,
                                                 const ManifestEntry& e) {
  EventStream s = load_events(m.sample_dir(e) + "/events.evs");
  s.t_end = std::max(s.t_end, 0.125);
  const auto frames = stack_events(s, 0.125);
  return {event_frame_to_input(frames.front(), 3),
          to_signed(load_png(m.sample_dir(e) + "/rgb.png"))};
}

}  // namespace

TEST_CASE("joint loss: frozen examples") {
  Tensor<float> y({3, 2, 2}), enh({3, 2, 2}), ev({3, 2, 2});
  y.fill(0.5f);
  enh.fill(0.5f);
  ev.fill(0.5f);
  REQUIRE(joint_loss(y, enh, ev, 0.8) == 0.0);

  // MSE(fusion, enhanced) = 1, MSE(fusion, event) = 0, beta = 0.8 -> 0.8
  enh.fill(1.5f);
  ev.fill(0.5f);
  REQUIRE(joint_loss(y, enh, ev, 0.8) == Catch::Approx(0.8).margin(1e-7));
}

TEST_CASE("joint loss matches scalar loop oracle within 1e-9") {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto y = random_tensor<double>({3, 5, 4}, rng);
    const auto enh = random_tensor<double>({3, 5, 4}, rng);
    const auto ev = random_tensor<double>({3, 5, 4}, rng);
    const double beta = uniform(rng, 0.0, 1.0);
    double mse_enh = 0.0, mse_ev = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      mse_enh += (y[i] - enh[i]) * (y[i] - enh[i]);
      mse_ev += (y[i] - ev[i]) * (y[i] - ev[i]);
    }
    mse_enh /= static_cast<double>(y.numel());
    mse_ev /= static_cast<double>(y.numel());
    const double expected = beta * mse_enh + (1.0 - beta) * mse_ev;
    REQUIRE(std::abs(joint_loss(y, enh, ev, beta) - expected) < 1e-9);
  }
}

TEST_CASE("joint loss is linear in beta") {
  Rng rng = make_rng(3);
  const auto y = random_tensor<double>({3, 4, 4}, rng);
  const auto enh = random_tensor<double>({3, 4, 4}, rng);
  const auto ev = random_tensor<double>({3, 4, 4}, rng);
  const double l0 = joint_loss(y, enh, ev, 0.0);
  const double l1 = joint_loss(y, enh, ev, 1.0);
  const double lh = joint_loss(y, enh, ev, 0.5);
  REQUIRE(lh == Catch::Approx(0.5 * (l0 + l1)).margin(1e-12));
  for (double beta : {0.2, 0.8}) {
    REQUIRE(joint_loss(y, enh, ev, beta) ==
            Catch::Approx((1 - beta) * l0 + beta * l1).margin(1e-12));
  }
}

TEST_CASE("joint loss gradient matches finite differences") {
  Rng rng = make_rng(4);
  auto y = random_tensor<double>({3, 3, 3}, rng);
  const auto enh = random_tensor<double>({3, 3, 3}, rng);
  const auto ev = random_tensor<double>({3, 3, 3}, rng);
  Tensor<double> g = Tensor<double>::zeros_like(y);
  joint_loss(y, enh, ev, 0.8, &g);
  const double eps = 1e-6;
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    const double keep = y[i];
    y[i] = keep + eps;
    const double hi = joint_loss(y, enh, ev, 0.8);
    y[i] = keep - eps;
    const double lo = joint_loss(y, enh, ev, 0.8);
    y[i] = keep;
    REQUIRE(std::abs((hi - lo) / (2 * eps) - g[i]) < 1e-7);
  }
}

TEST_CASE("joint loss rejects bad input") {
  Tensor<float> a({3, 2, 2}), b({3, 2, 4});
  REQUIRE_THROWS_AS(joint_loss(a, b, a, 0.8), std::invalid_argument);
  Tensor<float> c({3, 2, 2});
  REQUIRE_THROWS_AS(joint_loss(a, c, c, 1.5), std::invalid_argument);
}

TEST_CASE("attention weights: normalization over 1,000 random draws") {
  Rng rng = make_rng(5);
  FusionNet<float> net(tiny_config());
  for (int trial = 0; trial < 1000; ++trial) {
    net.init(rng);
    typename FusionNet<float>::Cache c;
    c.f_event = random_tensor<float>({4, 8, 8}, rng, -3.0, 3.0);
    c.f_enh = random_tensor<float>({4, 8, 8}, rng, -3.0, 3.0);
    net.attention_weights(c);
    for (int ch = 0; ch < 4; ++ch) {
      REQUIRE(std::abs(c.a(ch) + c.b(ch) - 1.0f) < 1e-6f);
      REQUIRE(c.a(ch) > 0.0f);
      REQUIRE(c.a(ch) < 1.0f);
      REQUIRE(c.b(ch) > 0.0f);
      REQUIRE(c.b(ch) < 1.0f);
    }
  }
}

TEST_CASE("attention weights: equal parameter rows give 0.5/0.5") {
  Rng rng = make_rng(6);
  FusionNet<float> net(tiny_config());
  net.init(rng);
  net.attn_b = net.attn_a;  // A_c == B_c for every channel
  typename FusionNet<float>::Cache c;
  c.f_event = random_tensor<float>({4, 8, 8}, rng);
  c.f_enh = random_tensor<float>({4, 8, 8}, rng);
  net.attention_weights(c);
  for (int ch = 0; ch < 4; ++ch) {
    REQUIRE(c.a(ch) == Catch::Approx(0.5).margin(1e-6));
    REQUIRE(c.b(ch) == Catch::Approx(0.5).margin(1e-6));
  }
}

TEST_CASE("attention weights: stable at logit difference +20") {
  FusionConfig cfg = tiny_config();
  cfg.compact_dim = 1;
  FusionNet<double> net(cfg);
  // force k = 1 by zeroing fc weights and setting its bias
  net.fc.w.fill(0.0);
  net.fc.b.fill(1.0);
  net.attn_a.fill(0.0);
  net.attn_b.fill(0.0);
  net.attn_a(0, 0) = 20.0;  // A_c k - B_c k = +20 for channel 0
  typename FusionNet<double>::Cache c;
  c.f_event = Tensor<double>({4, 4, 4});
  c.f_enh = Tensor<double>({4, 4, 4});
  net.attention_weights(c);
  const double expected = 1.0 / (1.0 + std::exp(-20.0));
  REQUIRE(std::abs(c.a(0) - expected) < 1e-8);

  // no overflow even at huge logits
  net.attn_a(0, 0) = 2000.0;
  net.attention_weights(c);
  REQUIRE(std::isfinite(c.a(0)));
  REQUIRE(c.a(0) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("attention weights: permutation equivariance") {
  Rng rng = make_rng(7);
  const FusionConfig cfg = tiny_config();
  FusionNet<float> net(cfg), permuted(cfg);
  net.init(rng);
  permuted.fc = net.fc;
  const int perm[4] = {2, 0, 3, 1};
  for (int ch = 0; ch < 4; ++ch) {
    for (int j = 0; j < cfg.compact_dim; ++j) {
      permuted.attn_a(ch, j) = net.attn_a(perm[ch], j);
      permuted.attn_b(ch, j) = net.attn_b(perm[ch], j);
    }
    for (int j = 0; j < cfg.compact_dim; ++j)
      permuted.fc.w(j, ch) = net.fc.w(j, perm[ch]);
  }
  typename FusionNet<float>::Cache c0, c1;
  c0.f_event = random_tensor<float>({4, 8, 8}, rng);
  c0.f_enh = random_tensor<float>({4, 8, 8}, rng);
  c1.f_event = Tensor<float>({4, 8, 8});
  c1.f_enh = Tensor<float>({4, 8, 8});
  for (int ch = 0; ch < 4; ++ch)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        c1.f_event(ch, y, x) = c0.f_event(perm[ch], y, x);
        c1.f_enh(ch, y, x) = c0.f_enh(perm[ch], y, x);
      }
  net.attention_weights(c0);
  permuted.attention_weights(c1);
  for (int ch = 0; ch < 4; ++ch) {
    REQUIRE(c1.a(ch) == Catch::Approx(c0.a(perm[ch])).margin(1e-5));
    REQUIRE(c1.b(ch) == Catch::Approx(c0.b(perm[ch])).margin(1e-5));
  }
}

TEST_CASE("fused feature is a channel-wise convex combination") {
  Rng rng = make_rng(8);
  FusionNet<float> net(tiny_config());
  net.init(rng);
  typename FusionNet<float>::Cache c;
  c.f_event = random_tensor<float>({4, 8, 8}, rng);
  c.f_enh = random_tensor<float>({4, 8, 8}, rng);
  net.attention_weights(c);
  net.fuse_features(c);
  for (int ch = 0; ch < 4; ++ch)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const float lo = std::min(c.f_event(ch, y, x), c.f_enh(ch, y, x));
        const float hi = std::max(c.f_event(ch, y, x), c.f_enh(ch, y, x));
        REQUIRE(c.fused(ch, y, x) >= lo - 1e-6f);
        REQUIRE(c.fused(ch, y, x) <= hi + 1e-6f);
      }

  // forced endpoint a_c = 1 reproduces the event branch exactly
  c.a.fill(1.0f);
  c.b.fill(0.0f);
  net.fuse_features(c);
  for (std::int64_t i = 0; i < c.fused.numel(); ++i)
    REQUIRE(c.fused[i] == c.f_event[i]);

  // a = b = 0.5 with identical branches reproduces either branch
  c.f_enh = c.f_event;
  c.a.fill(0.5f);
  c.b.fill(0.5f);
  net.fuse_features(c);
  for (std::int64_t i = 0; i < c.fused.numel(); ++i)
    REQUIRE(c.fused[i] == Catch::Approx(c.f_event[i]).margin(1e-6));
}

TEST_CASE("fusion image keeps the input resolution") {
  Rng rng = make_rng(9);
  FusionNet<float> net(tiny_config());
  net.init(rng);
  const auto xe = random_tensor<float>({3, 64, 64}, rng);
  const auto xh = random_tensor<float>({3, 64, 64}, rng);
  typename FusionNet<float>::Cache c;
  const auto y = net.forward(xe, xh, c);
  REQUIRE(y.dim(0) == 3);
  REQUIRE(y.dim(1) == 64);
  REQUIRE(y.dim(2) == 64);
}

TEST_CASE("indivisible spatial dims produce an error naming the padding") {
  Rng rng = make_rng(10);
  FusionNet<float> net(tiny_config());
  net.init(rng);
  const auto xe = random_tensor<float>({3, 30, 30}, rng);
  typename FusionNet<float>::Cache c;
  try {
    net.forward(xe, xe, c);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    REQUIRE(std::string(e.what()).find("32") != std::string::npos);
  }
}

TEST_CASE("fusion net gradients match finite differences (8x8, C=4, d=3)") {
  Rng rng = make_rng(12);
  FusionConfig cfg = tiny_config();
  FusionNet<double> net(cfg);
  net.init(rng);
  const auto xe = random_tensor<double>({3, 8, 8}, rng);
  const auto xh = random_tensor<double>({3, 8, 8}, rng);
  const auto enh_t = random_tensor<double>({3, 8, 8}, rng);
  const auto ev_t = random_tensor<double>({3, 8, 8}, rng);

  auto objective = [&]() {
    typename FusionNet<double>::Cache c;
    const auto y = net.forward(xe, xh, c);
    return joint_loss(y, enh_t, ev_t, 0.8);
  };

  auto refs = net.params();
  nn::zero_grads(refs);
  {
    typename FusionNet<double>::Cache c;
    const auto y = net.forward(xe, xh, c);
    Tensor<double> gy = Tensor<double>::zeros_like(y);
    joint_loss(y, enh_t, ev_t, 0.8, &gy);
    net.backward(c, gy);
  }

  Rng pick = make_rng(1);
  const double eps = 1e-5;
  for (const auto& r : refs) {
    const int trials = r.value->numel() < 12 ? static_cast<int>(r.value->numel()) : 8;
    for (int t = 0; t < trials; ++t) {
      const std::int64_t i =
          r.value->numel() < 12 ? t
                                : uniform_int(pick, 0, static_cast<int>(r.value->numel()) - 1);
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

TEST_CASE("train_fusion: zero epochs, determinism, loss descent") {
  const std::string root = temp_dataset("even_fus_ds", 16);
  const auto manifest = load_manifest(root);

  FusionConfig cfg = tiny_config();
  cfg.epochs = 0;
  const auto rz = train_fusion(manifest, Split::train, cfg, raw_pair);
  REQUIRE(rz.epoch_loss.empty());
  Rng rng = make_rng(cfg.seed);
  FusionNet<float> init(cfg);
  init.init(rng);
  const auto init_params = export_params(init.params());
  for (const auto& [name, t] : rz.params) {
    const auto& u = init_params.at(name);
    for (std::int64_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == u[i]);
  }

  cfg.epochs = 3;
  const auto r1 = train_fusion(manifest, Split::train, cfg, raw_pair);
  const auto r2 = train_fusion(manifest, Split::train, cfg, raw_pair);
  REQUIRE(r1.epoch_loss.size() == 3);
  REQUIRE(r1.epoch_loss == r2.epoch_loss);  // bitwise-identical history
  REQUIRE(r1.epoch_loss.back() < r1.epoch_loss.front());

  DatasetManifest train_only = manifest;
  std::erase_if(train_only.entries,
                [](const ManifestEntry& e) { return e.split == Split::val; });
  REQUIRE_THROWS_AS(train_fusion(train_only, Split::val, cfg, raw_pair),
                    std::invalid_argument);
  fs::remove_all(root);
}

TEST_CASE("EVNP parameter container round trip") {
  Rng rng = make_rng(14);
  FusionNet<float> net(tiny_config());
  net.init(rng);
  const auto params = export_params(net.params());
  const std::string path =
      (fs::temp_directory_path() / "even_fus_params.evnp").string();
  save_params(path, params);
  const auto loaded = load_params(path);
  REQUIRE(loaded.size() == params.size());
  for (const auto& [name, t] : params) {
    const auto& u = loaded.at(name);
    REQUIRE(u.same_shape(t));
    for (std::int64_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == u[i]);
  }
  fs::remove(path);
}

TEST_CASE("export_fusion_images: one file per sample, bitwise repeatable") {
  const std::string root = temp_dataset("even_fus_exp", 8);
  const auto manifest = load_manifest(root);
  Rng rng = make_rng(15);
  FusionNet<float> net(tiny_config());
  net.init(rng);
  const auto params = export_params(net.params());

  export_fusion_images(manifest, params, tiny_config(), raw_pair, "fusion_even");
  std::vector<std::string> first;
  for (const auto& e : manifest.entries) {
    const std::string f = manifest.sample_dir(e) + "/fusion_even.png";
    REQUIRE(fs::exists(f));
    first.push_back(f + ".keep");
    fs::copy_file(f, first.back());
  }
  export_fusion_images(manifest, params, tiny_config(), raw_pair, "fusion_even");
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const std::string f =
        manifest.sample_dir(manifest.entries[i]) + "/fusion_even.png";
    REQUIRE(files_identical(f, first[i]));
    // exported images live in [0,1] after the clamp
    const auto img = load_png(f);
    for (std::int64_t j = 0; j < img.numel(); ++j) {
      REQUIRE(img[j] >= 0.0f);
      REQUIRE(img[j] <= 1.0f);
    }
  }
  fs::remove_all(root);
}

TEST_CASE("signed/unit image conversions invert each other") {
  Rng rng = make_rng(16);
  Tensor<float> img({3, 4, 4});
  for (std::int64_t i = 0; i < img.numel(); ++i)
    img[i] = static_cast<float>(uniform(rng, 0.0, 1.0));
  const auto back = to_unit(to_signed(img));
  for (std::int64_t i = 0; i < img.numel(); ++i)
    REQUIRE(back[i] == Catch::Approx(img[i]).margin(1e-6));
}
