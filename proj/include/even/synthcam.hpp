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

#ifndef EVEN_SYNTHCAM_HPP
#define EVEN_SYNTHCAM_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "even/events.hpp"
#include "even/io.hpp"
#include "even/rng.hpp"
#include "even/tensor.hpp"

namespace even {

enum class WeatherKind { clear, rain, fog, rain_and_fog };

inline std::string to_string(WeatherKind k) {
  switch (k) {
    case WeatherKind::clear: return "clear";
    case WeatherKind::rain: return "rain";
    case WeatherKind::fog: return "fog";
    case WeatherKind::rain_and_fog: return "rain_and_fog";
  }
  throw std::logic_error("bad WeatherKind");
}

inline WeatherKind weather_from_string(const std::string& s) {
  if (s == "clear") return WeatherKind::clear;
  if (s == "rain") return WeatherKind::rain;
  if (s == "fog") return WeatherKind::fog;
  if (s == "rain_and_fog") return WeatherKind::rain_and_fog;
  throw std::invalid_argument("unknown weather kind: " + s);
}

struct WeatherTag {
  WeatherKind kind = WeatherKind::clear;
  double intensity = 0.0;  // in [0, 1]
};

/// One layered geometric object: an axis-aligned rectangle or ellipse at a
/// fixed depth, drifting with constant pixel velocity.
struct SceneObject {
  bool ellipse = false;
  double cx = 0, cy = 0;       // center at time 0, pixels
  double sx = 4, sy = 4;       // half extents, pixels
  double vx = 0, vy = 0;       // pixels / s
  double depth = 5.0;          // meters
  float albedo[3] = {0.5f, 0.5f, 0.5f};
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 64, height = 64;
  int object_count = 3;
  double d_min = 1.0, d_max = 20.0;
  std::vector<SceneObject> objects;
  std::string tag = "city";
};

inline SceneSpec make_scene(std::uint64_t seed, int width, int height,
                            int object_count, double d_min, double d_max) {
  if (object_count < 1) throw std::invalid_argument("make_scene: object_count < 1");
  if (!(d_min > 0.0 && d_min < d_max))
    throw std::invalid_argument("make_scene: bad depth range");
  SceneSpec spec;
  spec.seed = seed;
  spec.width = width;
  spec.height = height;
  spec.object_count = object_count;
  spec.d_min = d_min;
  spec.d_max = d_max;
  Rng rng = make_rng(seed);
  static const char* kTags[] = {"city", "rural", "tunnel", "highway"};
  spec.tag = kTags[uniform_int(rng, 0, 3)];
  for (int i = 0; i < object_count; ++i) {
    SceneObject o;
    o.ellipse = uniform_int(rng, 0, 1) == 1;
    o.cx = uniform(rng, 0.0, width - 1.0);
    o.cy = uniform(rng, 0.0, height - 1.0);
    o.sx = uniform(rng, 0.06, 0.22) * width;
    o.sy = uniform(rng, 0.06, 0.22) * height;
    o.vx = uniform(rng, -0.12, 0.12) * width;
    o.vy = uniform(rng, -0.06, 0.06) * height;
    o.depth = uniform(rng, d_min, 0.8 * d_max);
    for (float& a : o.albedo) a = static_cast<float>(uniform(rng, 0.25, 0.95));
    spec.objects.push_back(o);
  }
  return spec;
}

/// Renders the scene at a point in time. Depth is exact by construction:
/// per pixel the minimum over covering objects, else the ground-plane ramp
/// (far at the top of the image, near at the bottom). Albedo is shaded by a
/// depth cue so appearance correlates with distance.
inline void render_scene(const SceneSpec& spec, double time, Tensor<float>& rgb,
                         Tensor<float>& depth) {
  if (time < 0.0) throw std::invalid_argument("render_scene: negative time");
  const int w = spec.width, h = spec.height;
  rgb = Tensor<float>({3, h, w});
  depth = Tensor<float>({h, w});

  for (int y = 0; y < h; ++y) {
    const double bg_depth =
        spec.d_min + (spec.d_max - spec.d_min) * (1.0 - static_cast<double>(y) / (h - 1));
    for (int x = 0; x < w; ++x) {
      double d = bg_depth;
      const SceneObject* hit = nullptr;
      for (const SceneObject& o : spec.objects) {
        // wrap drifting objects around the frame
        double ox = std::fmod(o.cx + o.vx * time, static_cast<double>(w));
        double oy = std::fmod(o.cy + o.vy * time, static_cast<double>(h));
        if (ox < 0) ox += w;
        if (oy < 0) oy += h;
        const double dx = x - ox, dy = y - oy;
        bool inside;
        if (o.ellipse)
          inside = (dx * dx) / (o.sx * o.sx) + (dy * dy) / (o.sy * o.sy) <= 1.0;
        else
          inside = std::abs(dx) <= o.sx && std::abs(dy) <= o.sy;
        if (inside && o.depth < d) {
          d = o.depth;
          hit = &o;
        }
      }
      depth(y, x) = static_cast<float>(d);
      const double shade =
          std::clamp(1.1 - 0.9 * (d - spec.d_min) / (spec.d_max - spec.d_min), 0.15, 1.0);
      const double tex = 1.0 + 0.08 * std::sin(0.55 * x) * std::cos(0.4 * y);
      for (int c = 0; c < 3; ++c) {
        const double albedo = hit ? hit->albedo[c] : 0.35;
        rgb(c, y, x) = static_cast<float>(std::clamp(albedo * shade * tex, 0.0, 1.0));
      }
    }
  }
}

/// clip(gain * rgb^gamma + N(0, sigma), 0, 1)
inline Tensor<float> apply_night(const Tensor<float>& rgb, double gain,
                                 double gamma, double noise_sigma, Rng& rng) {
  if (!(gain > 0.0 && gain <= 1.0))
    throw std::invalid_argument("apply_night: gain outside (0,1]");
  if (gamma < 1.0) throw std::invalid_argument("apply_night: gamma < 1");
  if (noise_sigma < 0.0) throw std::invalid_argument("apply_night: sigma < 0");
  Tensor<float> out = rgb;
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    double v = gain * std::pow(static_cast<double>(out[i]), gamma);
    if (noise_sigma > 0.0) v += normal(rng, 0.0, noise_sigma);
    out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

/// Koschmieder attenuation: I' = I exp(-beta d) + A (1 - exp(-beta d))
inline Tensor<float> apply_fog(const Tensor<float>& rgb, const Tensor<float>& depth,
                               double beta, double airlight) {
  if (beta < 0.0) throw std::invalid_argument("apply_fog: negative beta");
  if (!(airlight >= 0.0 && airlight <= 1.0))
    throw std::invalid_argument("apply_fog: airlight outside [0,1]");
  if (rgb.dim(1) != depth.dim(0) || rgb.dim(2) != depth.dim(1))
    throw std::invalid_argument("apply_fog: shape mismatch");
  Tensor<float> out = rgb;
  const int h = depth.dim(0), w = depth.dim(1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tr = std::exp(-beta * depth(y, x));
      for (int c = 0; c < 3; ++c)
        out(c, y, x) = static_cast<float>(out(c, y, x) * tr + airlight * (1.0 - tr));
    }
  }
  return out;
}

/// Additive bright streaks; count scales with intensity, intensity 0 is the
/// identity. Deterministic for a fixed rng state.
inline Tensor<float> apply_rain(const Tensor<float>& rgb, double intensity, Rng& rng) {
  if (!(intensity >= 0.0 && intensity <= 1.0))
    throw std::invalid_argument("apply_rain: intensity outside [0,1]");
  Tensor<float> out = rgb;
  if (intensity == 0.0) return out;
  const int h = rgb.dim(1), w = rgb.dim(2);
  const int max_streaks = std::max(4, h * w / 80);
  const int n = std::max(1, static_cast<int>(std::lround(intensity * max_streaks)));
  for (int s = 0; s < n; ++s) {
    double x = uniform(rng, 0.0, w - 1.0);
    double y = uniform(rng, 0.0, h - 1.0);
    const int len = uniform_int(rng, h / 10 + 1, h / 5 + 2);
    const double slant = uniform(rng, -0.25, 0.25);
    const float bright = static_cast<float>(uniform(rng, 0.25, 0.6));
    for (int i = 0; i < len; ++i) {
      const int yy = static_cast<int>(y) + i;
      const int xx = static_cast<int>(x + slant * i);
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) break;
      for (int c = 0; c < 3; ++c)
        out(c, yy, xx) = std::min(1.0f, out(c, yy, xx) + bright);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct DatasetConfig {
  std::string out_dir;
  int n_samples = 640;
  int width = 64, height = 64;
  std::uint64_t seed = 42;
  double d_min = 1.0, d_max = 20.0;
  int min_objects = 2, max_objects = 5;
  double train_frac = 0.70, val_frac = 0.15;  // test = remainder
  // weather mixture, normalized before sampling
  double w_clear = 0.25, w_rain = 0.25, w_fog = 0.25, w_rain_fog = 0.25;
  double event_threshold = 0.4;
  double delta_t = 0.125;
  // degradation knobs, tuned during bring-up
  double fog_beta_min = 0.05, fog_beta_max = 0.3;
  double fog_airlight = 0.55;
  double night_gain_min = 0.10, night_gain_max = 0.30;
  double night_gamma_min = 1.6, night_gamma_max = 2.4;
  double night_noise_sigma = 0.01;
  int num_workers = 1;
};

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  throw std::logic_error("bad Split");
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + s);
}

struct ManifestEntry {
  std::string id;
  Split split = Split::train;
  WeatherTag weather;
  std::string scene;
};

struct DatasetManifest {
  std::string root;  // directory holding manifest.txt and sample dirs
  double train_frac = 0.70, val_frac = 0.15;
  std::vector<ManifestEntry> entries;

  std::string sample_dir(const ManifestEntry& e) const { return root + "/" + e.id; }
  std::vector<ManifestEntry> split_entries(Split s) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(e);
    return out;
  }
};

inline void save_manifest(const DatasetManifest& m) {
  std::ofstream os(m.root + "/manifest.txt");
  if (!os) throw std::runtime_error("save_manifest: cannot write manifest in " + m.root);
  os << "# even dataset manifest: id split weather_kind weather_intensity scene\n";
  char frac[64];
  std::snprintf(frac, sizeof(frac), "# fractions %.2f %.2f %.2f", m.train_frac,
                m.val_frac, 1.0 - m.train_frac - m.val_frac);
  os << frac << "\n";
  for (const auto& e : m.entries) {
    char line[256];
    std::snprintf(line, sizeof(line), "%s %s %s %.6f %s", e.id.c_str(),
                  to_string(e.split).c_str(), to_string(e.weather.kind).c_str(),
                  e.weather.intensity, e.scene.c_str());
    os << line << "\n";
  }
}

inline DatasetManifest load_manifest(const std::string& dir) {
  std::ifstream is(dir + "/manifest.txt");
  if (!is) throw std::runtime_error("load_manifest: no manifest.txt in " + dir);
  DatasetManifest m;
  m.root = dir;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string word;
      if (hs >> word && word == "fractions") hs >> m.train_frac >> m.val_frac;
      continue;
    }
    std::istringstream ls(line);
    ManifestEntry e;
    std::string split, kind;
    if (!(ls >> e.id >> split >> kind >> e.weather.intensity >> e.scene))
      throw std::runtime_error("load_manifest: bad line: " + line);
    e.split = split_from_string(split);
    e.weather.kind = weather_from_string(kind);
    m.entries.push_back(e);
  }
  for (const auto& e : m.entries) {
    if (!std::filesystem::exists(m.sample_dir(e)))
      throw std::runtime_error("load_manifest: missing sample dir " + m.sample_dir(e));
  }
  return m;
}

inline Tensor<float> log_luminance(const Tensor<float>& rgb) {
  const int h = rgb.dim(1), w = rgb.dim(2);
  Tensor<float> out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double lum = (rgb(0, y, x) + rgb(1, y, x) + rgb(2, y, x)) / 3.0;
      out(y, x) = static_cast<float>(std::log(std::max(lum, 1e-3)));
    }
  return out;
}

namespace detail {

inline void generate_one_sample(const DatasetConfig& cfg, int index, Split split,
                                ManifestEntry& entry) {
  Rng rng = make_rng(stage_seed(cfg.seed, "sample/" + std::to_string(index)));

  const int n_obj = uniform_int(rng, cfg.min_objects, cfg.max_objects);
  const SceneSpec scene = make_scene(stage_seed(cfg.seed, "scene/" + std::to_string(index)),
                                     cfg.width, cfg.height, n_obj, cfg.d_min, cfg.d_max);
  const double t_now = uniform(rng, 0.5, 2.5);

  Tensor<float> clean_prev, clean_now, depth_prev, depth_now;
  render_scene(scene, t_now - cfg.delta_t, clean_prev, depth_prev);
  render_scene(scene, t_now, clean_now, depth_now);

  EventStream stream =
      synthesize_events(log_luminance(clean_prev), log_luminance(clean_now),
                        cfg.event_threshold, 0.0, cfg.delta_t);

  // weather pick
  double mix[4] = {cfg.w_clear, cfg.w_rain, cfg.w_fog, cfg.w_rain_fog};
  const double total = mix[0] + mix[1] + mix[2] + mix[3];
  if (total <= 0.0) throw std::invalid_argument("generate_dataset: empty weather mixture");
  double r = uniform(rng, 0.0, total);
  int kind = 3;
  for (int k = 0; k < 4; ++k) {
    if (r < mix[k]) {
      kind = k;
      break;
    }
    r -= mix[k];
  }
  WeatherTag weather;
  weather.kind = static_cast<WeatherKind>(kind);
  weather.intensity =
      weather.kind == WeatherKind::clear ? 0.0 : uniform(rng, 0.3, 1.0);

  Tensor<float> rgb = clean_now;
  const bool fog = weather.kind == WeatherKind::fog || weather.kind == WeatherKind::rain_and_fog;
  const bool rain = weather.kind == WeatherKind::rain || weather.kind == WeatherKind::rain_and_fog;
  if (fog) {
    const double beta =
        cfg.fog_beta_min + (cfg.fog_beta_max - cfg.fog_beta_min) * weather.intensity;
    rgb = apply_fog(rgb, depth_now, beta, cfg.fog_airlight);
  }
  rgb = apply_night(rgb, uniform(rng, cfg.night_gain_min, cfg.night_gain_max),
                    uniform(rng, cfg.night_gamma_min, cfg.night_gamma_max),
                    cfg.night_noise_sigma, rng);
  if (rain) rgb = apply_rain(rgb, weather.intensity, rng);

  char id[32];
  std::snprintf(id, sizeof(id), "s%06d", index);
  entry.id = id;
  entry.split = split;
  entry.weather = weather;
  entry.scene = scene.tag;

  const std::string dir = cfg.out_dir + "/" + entry.id;
  std::filesystem::create_directories(dir);
  save_png(dir + "/rgb.png", rgb);
  save_png(dir + "/clean.png", clean_now);
  save_events(dir + "/events.evs", stream);
  save_depth(dir + "/depth.dpt", depth_now);
}

}  // namespace detail

/// Writes samples and the manifest; fully deterministic in (config, seed).
inline DatasetManifest generate_dataset(const DatasetConfig& cfg) {
  if (cfg.n_samples < 1) throw std::invalid_argument("generate_dataset: n_samples < 1");
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec || !std::filesystem::is_directory(cfg.out_dir))
    throw std::runtime_error("generate_dataset: cannot create " + cfg.out_dir);

  // deterministic split assignment via seeded shuffle
  std::vector<int> order(static_cast<size_t>(cfg.n_samples));
  for (int i = 0; i < cfg.n_samples; ++i) order[static_cast<size_t>(i)] = i;
  Rng shuffle_rng = make_rng(stage_seed(cfg.seed, "split"));
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  const int n_train = static_cast<int>(std::lround(cfg.train_frac * cfg.n_samples));
  const int n_val = static_cast<int>(std::lround(cfg.val_frac * cfg.n_samples));
  std::vector<Split> splits(static_cast<size_t>(cfg.n_samples), Split::test);
  for (int i = 0; i < cfg.n_samples; ++i) {
    const int rank = static_cast<int>(
        std::find(order.begin(), order.end(), i) - order.begin());
    splits[static_cast<size_t>(i)] =
        rank < n_train ? Split::train : (rank < n_train + n_val ? Split::val : Split::test);
  }

  DatasetManifest m;
  m.root = cfg.out_dir;
  m.train_frac = cfg.train_frac;
  m.val_frac = cfg.val_frac;
  m.entries.resize(static_cast<size_t>(cfg.n_samples));

  const int workers = std::max(1, cfg.num_workers);
  if (workers == 1) {
    for (int i = 0; i < cfg.n_samples; ++i)
      detail::generate_one_sample(cfg, i, splits[static_cast<size_t>(i)],
                                  m.entries[static_cast<size_t>(i)]);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (int i = t; i < cfg.n_samples; i += workers)
          detail::generate_one_sample(cfg, i, splits[static_cast<size_t>(i)],
                                      m.entries[static_cast<size_t>(i)]);
      });
    }
    for (auto& th : pool) th.join();
  }

  save_manifest(m);
  return m;
}

}  // namespace even

#endif  // EVEN_SYNTHCAM_HPP
