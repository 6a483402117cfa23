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

#ifndef EVEN_PIPELINE_HPP
#define EVEN_PIPELINE_HPP

#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "even/config.hpp"
#include "even/depth.hpp"
#include "even/enhance.hpp"
#include "even/evaluate.hpp"
#include "even/fusion.hpp"
#include "even/io.hpp"
#include "even/plot.hpp"
#include "even/synthcam.hpp"

namespace even {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run directories and pipeline state
// ---------------------------------------------------------------------------

/// Stage orchestration rooted at one output directory. Every stage writes
/// into a fresh numbered run directory (`runs/0001-gen-data`, ...), so no
/// invocation silently overwrites a prior run. A `state.txt` file at the
/// root maps artifact keys (`dataset`, `enhancer`, `fusion.even`,
/// `depth.rgb`, ...) to the latest produced path so later stages find their
/// inputs.
class Pipeline {
 public:
  Pipeline(std::string out_dir, RunConfig cfg, int num_workers = 1)
      : out_dir_(std::move(out_dir)), cfg_(std::move(cfg)),
        num_workers_(num_workers) {
    fs::create_directories(out_dir_);
    load_state();
  }

  const std::string& out_dir() const { return out_dir_; }
  const RunConfig& config() const { return cfg_; }

  std::string state(const std::string& key) const {
    auto it = state_.find(key);
    return it == state_.end() ? "" : it->second;
  }

  // -- stages ---------------------------------------------------------------

  std::string gen_data() {
    const std::string run = new_run_dir("gen-data");
    DatasetConfig d = cfg_.dataset_config(run + "/dataset");
    d.num_workers = num_workers_;
    const DatasetManifest manifest = generate_dataset(d);
    log("gen-data: wrote %zu samples to %s\n", manifest.entries.size(),
        d.out_dir.c_str());
    set_state("dataset", d.out_dir);
    return run;
  }

  std::string train_enhance() {
    const DatasetManifest manifest = require_dataset("train-enhance");
    const EnhancerConfig e = cfg_.enhancer_config();
    const std::string run = new_run_dir("train-enhance");
    if (e.kind == EnhancerKind::analytic) {
      write_text(run + "/NOTE.txt",
                 "enhancer.kind = analytic: closed-form enhancer, nothing to "
                 "train.\n");
      log("train-enhance: analytic enhancer, no parameters to train\n");
      set_state("enhancer", "analytic");
      return run;
    }
    const TrainResult r = train_enhancer(manifest, Split::train, e);
    const std::string path = run + "/enhancer.evnp";
    save_params(path, r.params);
    write_loss(run + "/loss", r.epoch_loss, "enhancer loss");
    log("train-enhance: %d epoch(s), final loss %.6g -> %s\n", e.epochs,
        r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back(), path.c_str());
    set_state("enhancer", path);
    return run;
  }

  std::string train_fusion_stage(InputKind kind = InputKind::even) {
    if (!InputPipelines::needs_fusion(kind))
      throw ConfigError("train-fusion: input kind `" + to_string(kind) +
                        "` has no fusion stage");
    const DatasetManifest manifest = require_dataset("train-fusion");
    const InputPipelines pipelines = make_pipelines("train-fusion");
    const FusionConfig f = cfg_.fusion_config();
    const std::string run = new_run_dir("train-fusion");
    const FusionTrainResult r =
        train_fusion(manifest, Split::train, f, pipelines.pair_loader(kind));
    const std::string path = run + "/fusion_" + file_stem(kind) + ".evnp";
    save_params(path, r.params);
    write_loss(run + "/loss", r.epoch_loss, "fusion loss (" + to_string(kind) + ")");
    log("train-fusion[%s]: %d epoch(s), final loss %.6g -> %s\n",
        to_string(kind).c_str(), f.epochs,
        r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back(), path.c_str());
    set_state("fusion." + to_string(kind), path);
    return run;
  }

  std::string export_fusion() {
    const DatasetManifest manifest = require_dataset("export-fusion");
    const std::string params_path = state("fusion.even");
    if (params_path.empty())
      throw MissingDependencyError(
          "export-fusion: no trained fusion parameters; run train-fusion first");
    const InputPipelines pipelines = make_pipelines("export-fusion");
    const std::string run = new_run_dir("export-fusion");
    export_fusion_images(manifest, load_params(params_path), cfg_.fusion_config(),
                         pipelines.pair_loader(InputKind::even), "fusion_even");
    write_text(run + "/NOTE.txt", "fusion_even.png written into every sample dir of\n" +
                                      manifest.root + "\n");
    log("export-fusion: wrote fusion_even.png for %zu samples\n",
        manifest.entries.size());
    set_state("fusion_images", manifest.root);
    return run;
  }

  std::string train_depth_stage(InputKind kind) {
    const DatasetManifest manifest = require_dataset("train-depth");
    const InputPipelines pipelines = make_pipelines("train-depth");
    check_kind_ready(pipelines, kind, "train-depth");
    DepthConfig d = cfg_.depth_config();
    d.seed = stage_seed(cfg_.seed(), "train-depth/" + to_string(kind));
    const std::string run = new_run_dir("train-depth");
    const DepthTrainResult r =
        train_depth(manifest, Split::train, d, pipelines.input_loader(kind));
    const std::string path = run + "/depth_" + file_stem(kind) + ".evnp";
    save_params(path, r.params);
    write_loss(run + "/loss", r.epoch_loss, "depth loss (" + to_string(kind) + ")");
    log("train-depth[%s]: %d epoch(s), final loss %.6g -> %s\n",
        to_string(kind).c_str(), d.epochs,
        r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back(), path.c_str());
    set_state("depth." + to_string(kind), path);
    return run;
  }

  std::string eval(const std::vector<InputKind>& kinds) {
    const DatasetManifest manifest = require_dataset("eval");
    const InputPipelines pipelines = make_pipelines("eval");
    const DepthConfig d = cfg_.depth_config();
    const auto entries = manifest.split_entries(Split::test);
    MetricsTable table;
    for (InputKind kind : kinds) {
      const std::string params_path = state("depth." + to_string(kind));
      if (params_path.empty())
        throw MissingDependencyError("eval: no trained depth net for `" +
                                     to_string(kind) +
                                     "`; run train-depth for this kind first");
      check_kind_ready(pipelines, kind, "eval");
      table.emplace_back(to_string(kind),
                         evaluate_depth(manifest, entries, load_params(params_path),
                                        d, pipelines.input_loader(kind)));
    }
    const std::string run = new_run_dir("eval");
    const std::string text = format_metrics_table(table);
    write_text(run + "/metrics.txt", text);
    save_metrics_records(run + "/metrics.records", table);
    plot_metric_bars(table, run + "/abs_rel.png", "abs_rel");
    log("%s", text.c_str());
    set_state("metrics", run + "/metrics.records");
    return run;
  }

  /// Seven-row comparison: trains whatever the matrix still needs (fusion
  /// nets for the fused kinds, one depth net per kind), then evaluates every
  /// kind on the test split.
  std::string baselines() {
    const DatasetManifest manifest = require_dataset("baselines");
    InputPipelines pipelines = make_pipelines("baselines");
    const FusionConfig f = cfg_.fusion_config();
    DepthConfig d = cfg_.depth_config();
    const std::string run = new_run_dir("baselines");

    std::map<std::string, NamedTensors> depth_params;
    for (InputKind kind : all_input_kinds()) {
      const std::string name = to_string(kind);
      if (InputPipelines::needs_fusion(kind) &&
          !(kind == InputKind::even && pipelines.even_from_files)) {
        if (!pipelines.fusion_params.count(name)) {
          FusionConfig fk = f;
          fk.seed = stage_seed(cfg_.seed(), "train-fusion/" + name);
          log("baselines: training fusion net for `%s`\n", name.c_str());
          FusionTrainResult fr =
              train_fusion(manifest, Split::train, fk, pipelines.pair_loader(kind));
          const std::string path = run + "/fusion_" + file_stem(kind) + ".evnp";
          save_params(path, fr.params);
          pipelines.fusion_params[name] = std::move(fr.params);
          set_state("fusion." + name, path);
        }
      }
      const std::string existing = state("depth." + name);
      if (!existing.empty()) {
        depth_params[name] = load_params(existing);
      } else {
        DepthConfig dk = d;
        dk.seed = stage_seed(cfg_.seed(), "train-depth/" + name);
        log("baselines: training depth net for `%s`\n", name.c_str());
        DepthTrainResult dr =
            train_depth(manifest, Split::train, dk, pipelines.input_loader(kind));
        const std::string path = run + "/depth_" + file_stem(kind) + ".evnp";
        save_params(path, dr.params);
        set_state("depth." + name, path);
        depth_params[name] = std::move(dr.params);
      }
    }
    const MetricsTable table =
        run_baseline_matrix(manifest, pipelines, d, depth_params, Split::test);
    const std::string text = format_metrics_table(table);
    write_text(run + "/metrics.txt", text);
    save_metrics_records(run + "/metrics.records", table);
    plot_metric_bars(table, run + "/abs_rel.png", "abs_rel");
    log("%s", text.c_str());
    set_state("baselines", run + "/metrics.records");
    return run;
  }

  std::string crossval() {
    const DatasetManifest manifest = require_dataset("crossval");
    const EnhancerConfig e = cfg_.enhancer_config();
    std::optional<NamedTensors> enh = load_enhancer_params("crossval", e);
    FusionConfig f = cfg_.fusion_config();
    f.seed = stage_seed(cfg_.seed(), "crossval/fusion");
    DepthConfig d = cfg_.depth_config();
    d.seed = stage_seed(cfg_.seed(), "crossval/depth");
    const CrossValResult r =
        weather_cross_validation(manifest, e, f, d, enh ? &*enh : nullptr);
    MetricsTable table = {{"train_mixed", r.trained_on_mixed},
                          {"train_single", r.trained_on_single}};
    const std::string run = new_run_dir("crossval");
    const std::string text = format_metrics_table(table);
    write_text(run + "/metrics.txt", text);
    save_metrics_records(run + "/metrics.records", table);
    log("%s", text.c_str());
    set_state("crossval", run + "/metrics.records");
    return run;
  }

  /// Full sequence on one output directory.
  void all() {
    gen_data();
    train_enhance();
    train_fusion_stage(InputKind::even);
    export_fusion();
    const std::vector<InputKind> kinds = cfg_.eval_kinds();
    for (InputKind k : kinds) train_depth_stage(k);
    eval(kinds);
  }

  bool quiet = false;

 private:
  DatasetManifest require_dataset(const std::string& stage) const {
    const std::string root = state("dataset");
    if (root.empty())
      throw MissingDependencyError(stage + ": no dataset; run gen-data first");
    return load_manifest(root);
  }

  /// Pipelines loaded from the recorded artifacts: enhancer parameters when
  /// the trainable enhancer was used, plus any trained fusion nets.
  InputPipelines make_pipelines(const std::string& stage) const {
    InputPipelines p;
    p.enhancer_cfg = cfg_.enhancer_config();
    p.enhancer_params = load_enhancer_params(stage, p.enhancer_cfg);
    p.fusion_cfg = cfg_.fusion_config();
    p.delta_t = cfg_.get_double("dataset.delta_t", 0.125);
    for (InputKind kind : all_input_kinds()) {
      const std::string path = state("fusion." + to_string(kind));
      if (!path.empty()) p.fusion_params[to_string(kind)] = load_params(path);
    }
    return p;
  }

  std::optional<NamedTensors> load_enhancer_params(const std::string& stage,
                                                   const EnhancerConfig& e) const {
    if (e.kind != EnhancerKind::attention_unet) return std::nullopt;
    const std::string path = state("enhancer");
    if (path.empty() || path == "analytic")
      throw MissingDependencyError(
          stage + ": enhancer.kind is attention_unet but no trained enhancer "
                  "parameters exist; run train-enhance first");
    return load_params(path);
  }

  /// Fails early, naming the missing stage, instead of failing per sample.
  void check_kind_ready(const InputPipelines& p, InputKind kind,
                        const std::string& stage) const {
    const std::string name = to_string(kind);
    if (kind == InputKind::even && p.even_from_files) {
      if (state("fusion_images").empty())
        throw MissingDependencyError(stage + ": input kind `even` needs exported "
                                             "fusion images; run export-fusion "
                                             "first");
      return;
    }
    if (InputPipelines::needs_fusion(kind) && !p.fusion_params.count(name))
      throw MissingDependencyError(stage + ": input kind `" + name +
                                   "` needs a trained fusion net; run "
                                   "train-fusion for this kind first");
  }

  // -- bookkeeping ----------------------------------------------------------

  std::string new_run_dir(const std::string& stage) {
    fs::create_directories(out_dir_ + "/runs");
    int id = 0;
    for (const auto& d : fs::directory_iterator(out_dir_ + "/runs")) {
      const std::string name = d.path().filename().string();
      if (name.size() > 4 && std::isdigit(static_cast<unsigned char>(name[0])))
        id = std::max(id, std::atoi(name.substr(0, 4).c_str()));
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-", id + 1);
    const std::string run = out_dir_ + "/runs/" + buf + stage;
    fs::create_directories(run);
    write_text(run + "/config.resolved.cfg", cfg_.resolved());
    return run;
  }

  void load_state() {
    std::ifstream is(out_dir_ + "/state.txt");
    std::string key, path;
    while (is >> key >> path) state_[key] = path;
  }

  void set_state(const std::string& key, const std::string& path) {
    state_[key] = path;
    std::ofstream os(out_dir_ + "/state.txt");
    for (const auto& [k, v] : state_) os << k << " " << v << "\n";
  }

  static void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << text;
  }

  static void write_loss(const std::string& stem, const std::vector<double>& loss,
                         const std::string& title) {
    std::string txt;
    for (size_t i = 0; i < loss.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%zu %.9g\n", i, loss[i]);
      txt += buf;
    }
    write_text(stem + ".txt", txt);
    plot_loss_curve(loss, stem + ".png", title);
  }

  /// File-name-safe form of an input kind ("rgb+sobel" -> "rgb_sobel").
  static std::string file_stem(InputKind kind) {
    std::string s = to_string(kind);
    for (char& c : s)
      if (c == '+') c = '_';
    return s;
  }

  void log(const char* fmt, ...) const {
    if (quiet) return;
    va_list args;
    va_start(args, fmt);
    std::vprintf(fmt, args);
    va_end(args);
    std::fflush(stdout);
  }

  std::string out_dir_;
  RunConfig cfg_;
  int num_workers_ = 1;
  std::map<std::string, std::string> state_;
};

}  // namespace even

#endif  // EVEN_PIPELINE_HPP
