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

#ifndef EVEN_EVALUATE_HPP
#define EVEN_EVALUATE_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "even/depth.hpp"
#include "even/enhance.hpp"
#include "even/events.hpp"
#include "even/fusion.hpp"
#include "even/io.hpp"
#include "even/synthcam.hpp"

namespace even {

// ---------------------------------------------------------------------------
// Eigen-protocol metrics
// ---------------------------------------------------------------------------

struct MetricsReport {
  double abs_rel = 0, sq_rel = 0, rmse = 0, log10 = 0;
  double alpha1 = 0, alpha2 = 0, alpha3 = 0;
  std::int64_t n_pixels = 0;
};

/// Errors and threshold accuracies over the intersection of the valid masks.
/// Threshold comparisons are strict: max(p/g, g/p) < 1.25^i.
inline MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt) {
  if (!pred.data.same_shape(gt.data))
    throw std::invalid_argument("compute_metrics: shape mismatch");
  MetricsReport r;
  double sq_err = 0.0;
  for (std::int64_t i = 0; i < gt.data.numel(); ++i) {
    if (!pred.valid_mask[i] || !gt.valid_mask[i]) continue;
    const double p = pred.data[i], g = gt.data[i];
    if (g <= 0.0)
      throw std::invalid_argument("compute_metrics: non-positive ground truth");
    if (p <= 0.0)
      throw std::invalid_argument("compute_metrics: non-positive prediction");
    const double diff = p - g;
    r.abs_rel += std::abs(diff) / g;
    r.sq_rel += diff * diff / g;
    sq_err += diff * diff;
    r.log10 += std::abs(std::log10(p) - std::log10(g));
    const double ratio = std::max(p / g, g / p);
    if (ratio < 1.25) r.alpha1 += 1.0;
    if (ratio < 1.25 * 1.25) r.alpha2 += 1.0;
    if (ratio < 1.25 * 1.25 * 1.25) r.alpha3 += 1.0;
    ++r.n_pixels;
  }
  if (r.n_pixels == 0) throw std::invalid_argument("compute_metrics: empty valid mask");
  const double n = static_cast<double>(r.n_pixels);
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(sq_err / n);
  r.log10 /= n;
  r.alpha1 /= n;
  r.alpha2 /= n;
  r.alpha3 /= n;
  return r;
}

// ---------------------------------------------------------------------------
// Sobel edge baseline
// ---------------------------------------------------------------------------

/// Grayscale 3x3 Sobel magnitude, max-normalized and channel-replicated.
inline Tensor<float> sobel_image(const Tensor<float>& rgb) {
  const int h = rgb.dim(1), w = rgb.dim(2);
  Tensor<float> gray({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      gray(y, x) = (rgb(0, y, x) + rgb(1, y, x) + rgb(2, y, x)) / 3.0f;

  static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  Tensor<float> mag({h, w});
  float max_mag = 0.0f;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0.0, gy = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = std::clamp(y + dy, 0, h - 1);
          const int xx = std::clamp(x + dx, 0, w - 1);
          gx += kx[dy + 1][dx + 1] * gray(yy, xx);
          gy += ky[dy + 1][dx + 1] * gray(yy, xx);
        }
      mag(y, x) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
      max_mag = std::max(max_mag, mag(y, x));
    }
  }
  if (max_mag > 0.0f)
    for (std::int64_t i = 0; i < mag.numel(); ++i) mag[i] /= max_mag;
  Tensor<float> out({3, h, w});
  for (int c = 0; c < 3; ++c)
    std::copy(mag.data(), mag.data() + mag.numel(),
              out.data() + static_cast<std::int64_t>(c) * h * w);
  return out;
}

// ---------------------------------------------------------------------------
// Input pipelines for the seven baseline rows
// ---------------------------------------------------------------------------

inline Tensor<float> load_event_input(const DatasetManifest& m,
                                      const ManifestEntry& e, double delta_t) {
  EventStream stream = load_events(m.sample_dir(e) + "/events.evs");
  stream.t_end = std::max(stream.t_end, delta_t);
  const auto frames = stack_events(stream, delta_t);
  return event_frame_to_input(frames.front(), 3);
}

/// Everything needed to build the seven input pipelines. Fusion parameter
/// sets are keyed by input kind string; `even` additionally accepts
/// pre-exported fusion_even.png files.
struct InputPipelines {
  EnhancerConfig enhancer_cfg;
  std::optional<NamedTensors> enhancer_params;
  FusionConfig fusion_cfg;
  std::map<std::string, NamedTensors> fusion_params;
  double delta_t = 0.125;
  bool even_from_files = true;  // prefer exported fusion images for kind `even`

  Tensor<float> enhanced(const DatasetManifest& m, const ManifestEntry& e) const {
    const Tensor<float> rgb = load_png(m.sample_dir(e) + "/rgb.png");
    return enhance(rgb, enhancer_cfg,
                   enhancer_params ? &*enhancer_params : nullptr);
  }

  /// (event-branch, rgb-branch) pair in [-1,1] for a fused kind.
  std::pair<Tensor<float>, Tensor<float>> fusion_pair(const DatasetManifest& m,
                                                      const ManifestEntry& e,
                                                      InputKind kind) const {
    const std::string dir = m.sample_dir(e);
    switch (kind) {
      case InputKind::rgb_sobel:
        return {to_signed(sobel_image(load_png(dir + "/rgb.png"))),
                to_signed(load_png(dir + "/rgb.png"))};
      case InputKind::rgb_event:
        return {load_event_input(m, e, delta_t), to_signed(load_png(dir + "/rgb.png"))};
      case InputKind::enhanced_sobel:
        return {to_signed(sobel_image(load_png(dir + "/rgb.png"))),
                to_signed(enhanced(m, e))};
      case InputKind::even:
        return {load_event_input(m, e, delta_t), to_signed(enhanced(m, e))};
      default:
        throw std::invalid_argument("fusion_pair: kind " + to_string(kind) +
                                    " has no phase-2 stage");
    }
  }

  PairLoader pair_loader(InputKind kind) const {
    return [this, kind](const DatasetManifest& m, const ManifestEntry& e) {
      return fusion_pair(m, e, kind);
    };
  }

  static bool needs_fusion(InputKind kind) {
    return kind == InputKind::rgb_sobel || kind == InputKind::rgb_event ||
           kind == InputKind::enhanced_sobel || kind == InputKind::even;
  }

  /// Depth-net input (3 x H x W in [-1,1]) for any of the seven kinds.
  Tensor<float> input(const DatasetManifest& m, const ManifestEntry& e,
                      InputKind kind) const {
    const std::string dir = m.sample_dir(e);
    switch (kind) {
      case InputKind::rgb:
        return to_signed(load_png(dir + "/rgb.png"));
      case InputKind::event:
        return load_event_input(m, e, delta_t);
      case InputKind::enhanced:
        return to_signed(enhanced(m, e));
      case InputKind::even:
        if (even_from_files) {
          const std::string f = dir + "/fusion_even.png";
          if (!std::filesystem::exists(f))
            throw std::runtime_error(
                "input pipeline `even`: missing " + f +
                " (run the export-fusion stage first)");
          return to_signed(load_png(f));
        }
        [[fallthrough]];
      case InputKind::rgb_sobel:
      case InputKind::rgb_event:
      case InputKind::enhanced_sobel: {
        auto it = fusion_params.find(to_string(kind));
        if (it == fusion_params.end())
          throw std::runtime_error(
              "input pipeline `" + to_string(kind) +
              "`: no trained fusion parameters (run the train-fusion stage "
              "for this input kind first)");
        FusionNet<float> net(fusion_cfg);
        import_params(net.params(), it->second);
        auto [a, b] = fusion_pair(m, e, kind);
        return fuse(a, b, net).fusion_image;
      }
    }
    throw std::invalid_argument("input: bad kind");
  }

  InputLoader input_loader(InputKind kind) const {
    return [this, kind](const DatasetManifest& m, const ManifestEntry& e) {
      return input(m, e, kind);
    };
  }
};

// ---------------------------------------------------------------------------
// Evaluation over a split
// ---------------------------------------------------------------------------

inline MetricsReport evaluate_depth(const DatasetManifest& manifest,
                                    const std::vector<ManifestEntry>& entries,
                                    const NamedTensors& depth_params,
                                    const DepthConfig& depth_cfg,
                                    const InputLoader& loader) {
  if (entries.empty()) throw std::invalid_argument("evaluate_depth: no samples");
  DepthNet<float> net(depth_cfg.d_min, depth_cfg.d_max);
  import_params(net.params(), depth_params);

  // pool per-pixel sums across samples by averaging per-sample reports
  // weighted by their pixel counts
  MetricsReport total;
  for (const auto& e : entries) {
    const Tensor<float> x = loader(manifest, e);
    DepthMap pred = predict_depth(x, net);
    DepthMap gt;
    gt.data = load_depth(manifest.sample_dir(e) + "/depth.dpt");
    gt.valid_mask = range_mask(gt.data, depth_cfg.d_min, depth_cfg.d_max);
    const MetricsReport r = compute_metrics(pred, gt);
    const double n = static_cast<double>(r.n_pixels);
    total.abs_rel += r.abs_rel * n;
    total.sq_rel += r.sq_rel * n;
    total.rmse += r.rmse * r.rmse * n;
    total.log10 += r.log10 * n;
    total.alpha1 += r.alpha1 * n;
    total.alpha2 += r.alpha2 * n;
    total.alpha3 += r.alpha3 * n;
    total.n_pixels += r.n_pixels;
  }
  const double n = static_cast<double>(total.n_pixels);
  total.abs_rel /= n;
  total.sq_rel /= n;
  total.rmse = std::sqrt(total.rmse / n);
  total.log10 /= n;
  total.alpha1 /= n;
  total.alpha2 /= n;
  total.alpha3 /= n;
  return total;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

using MetricsTable = std::vector<std::pair<std::string, MetricsReport>>;

inline std::string format_metrics_table(const MetricsTable& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %9s %9s %9s %9s %7s %7s %7s %10s\n",
                "input", "abs_rel", "sq_rel", "rmse", "log10", "a1", "a2", "a3",
                "n_pixels");
  out += buf;
  out += std::string(89, '-') + "\n";
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%-16s %9.4f %9.4f %9.4f %9.4f %7.4f %7.4f %7.4f %10lld\n",
                  name.c_str(), r.abs_rel, r.sq_rel, r.rmse, r.log10, r.alpha1,
                  r.alpha2, r.alpha3, static_cast<long long>(r.n_pixels));
    out += buf;
  }
  return out;
}

/// Machine-readable record file: one line per row,
/// "<input_kind> abs_rel sq_rel rmse log10 a1 a2 a3 n_pixels".
inline void save_metrics_records(const std::string& path, const MetricsTable& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_metrics_records: cannot open " + path);
  for (const auto& [name, r] : rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%s %.9g %.9g %.9g %.9g %.9g %.9g %.9g %lld\n", name.c_str(),
                  r.abs_rel, r.sq_rel, r.rmse, r.log10, r.alpha1, r.alpha2,
                  r.alpha3, static_cast<long long>(r.n_pixels));
    os << buf;
  }
}

inline MetricsTable load_metrics_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_metrics_records: cannot open " + path);
  MetricsTable rows;
  std::string name;
  MetricsReport r;
  while (is >> name >> r.abs_rel >> r.sq_rel >> r.rmse >> r.log10 >> r.alpha1 >>
         r.alpha2 >> r.alpha3 >> r.n_pixels)
    rows.emplace_back(name, r);
  return rows;
}

// ---------------------------------------------------------------------------
// Baseline matrix (the seven rows)
// ---------------------------------------------------------------------------

/// Evaluates one trained depth net per input kind on the test split. All
/// artifacts must be trained beforehand; missing ones produce an error naming
/// the stage to run.
inline MetricsTable run_baseline_matrix(
    const DatasetManifest& manifest, const InputPipelines& pipelines,
    const DepthConfig& depth_cfg,
    const std::map<std::string, NamedTensors>& depth_params_by_kind,
    Split split = Split::test) {
  MetricsTable table;
  const auto entries = manifest.split_entries(split);
  for (InputKind kind : all_input_kinds()) {
    auto it = depth_params_by_kind.find(to_string(kind));
    if (it == depth_params_by_kind.end())
      throw std::runtime_error("run_baseline_matrix: no trained depth net for `" +
                               to_string(kind) +
                               "` (run the train-depth stage for this kind)");
    table.emplace_back(to_string(kind),
                       evaluate_depth(manifest, entries, it->second, depth_cfg,
                                      pipelines.input_loader(kind)));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Weather two-fold cross-validation
// ---------------------------------------------------------------------------

struct CrossValSplit {
  std::vector<ManifestEntry> fold_single;  // rain-only and fog-only samples
  std::vector<ManifestEntry> fold_mixed;   // rain_and_fog samples
};

inline CrossValSplit weather_folds(const DatasetManifest& manifest) {
  CrossValSplit s;
  for (const auto& e : manifest.entries) {
    if (e.weather.kind == WeatherKind::rain || e.weather.kind == WeatherKind::fog)
      s.fold_single.push_back(e);
    else if (e.weather.kind == WeatherKind::rain_and_fog)
      s.fold_mixed.push_back(e);
  }
  return s;
}

/// A manifest view with one fold as the train split and the other as test.
inline DatasetManifest fold_manifest(const DatasetManifest& base,
                                     const std::vector<ManifestEntry>& train_fold,
                                     const std::vector<ManifestEntry>& test_fold) {
  DatasetManifest m;
  m.root = base.root;
  for (ManifestEntry e : train_fold) {
    e.split = Split::train;
    m.entries.push_back(e);
  }
  for (ManifestEntry e : test_fold) {
    e.split = Split::test;
    m.entries.push_back(e);
  }
  return m;
}

struct CrossValResult {
  MetricsReport trained_on_mixed;   // train rain_and_fog, test single conditions
  MetricsReport trained_on_single;  // train single conditions, test rain_and_fog
};

/// Trains the full EVEN pipeline (fusion + depth) per fold and evaluates on
/// the opposite fold. Fusion images are computed on the fly from the
/// fold-trained fusion net.
inline CrossValResult weather_cross_validation(
    const DatasetManifest& manifest, const EnhancerConfig& enhancer_cfg,
    FusionConfig fusion_cfg, DepthConfig depth_cfg,
    const NamedTensors* enhancer_params = nullptr) {
  const CrossValSplit folds = weather_folds(manifest);
  if (folds.fold_single.empty() || folds.fold_mixed.empty())
    throw std::invalid_argument(
        "weather_cross_validation: a fold is empty; the dataset needs rain, fog "
        "and rain_and_fog samples");

  auto run_fold = [&](const std::vector<ManifestEntry>& train_fold,
                      const std::vector<ManifestEntry>& test_fold) {
    const DatasetManifest fm = fold_manifest(manifest, train_fold, test_fold);
    InputPipelines pipelines;
    pipelines.enhancer_cfg = enhancer_cfg;
    if (enhancer_params) pipelines.enhancer_params = *enhancer_params;
    pipelines.fusion_cfg = fusion_cfg;
    pipelines.even_from_files = false;
    FusionTrainResult fusion = train_fusion(fm, Split::train, fusion_cfg,
                                            pipelines.pair_loader(InputKind::even));
    pipelines.fusion_params[to_string(InputKind::even)] = fusion.params;
    DepthTrainResult depth = train_depth(fm, Split::train, depth_cfg,
                                         pipelines.input_loader(InputKind::even));
    return evaluate_depth(fm, fm.split_entries(Split::test), depth.params,
                          depth_cfg, pipelines.input_loader(InputKind::even));
  };

  CrossValResult result;
  result.trained_on_mixed = run_fold(folds.fold_mixed, folds.fold_single);
  result.trained_on_single = run_fold(folds.fold_single, folds.fold_mixed);
  return result;
}

}  // namespace even

#endif  // EVEN_EVALUATE_HPP
