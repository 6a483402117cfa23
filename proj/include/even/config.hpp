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

#ifndef EVEN_CONFIG_HPP
#define EVEN_CONFIG_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "even/depth.hpp"
#include "even/enhance.hpp"
#include "even/fusion.hpp"
#include "even/synthcam.hpp"

namespace even {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingDependencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key-value experiment configuration with dotted section keys.
/// File format: one `key = value` per line, `#` starts a comment.
class RunConfig {
 public:
  RunConfig() = default;

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "seed",
        "dataset.n",
        "dataset.width",
        "dataset.height",
        "dataset.d_min",
        "dataset.d_max",
        "dataset.train_frac",
        "dataset.val_frac",
        "dataset.min_objects",
        "dataset.max_objects",
        "dataset.weather.clear",
        "dataset.weather.rain",
        "dataset.weather.fog",
        "dataset.weather.rain_and_fog",
        "dataset.event_threshold",
        "dataset.delta_t",
        "dataset.fog_beta_min",
        "dataset.fog_beta_max",
        "dataset.fog_airlight",
        "dataset.night_gain_min",
        "dataset.night_gain_max",
        "dataset.night_gamma_min",
        "dataset.night_gamma_max",
        "dataset.night_noise_sigma",
        "enhancer.kind",
        "enhancer.gamma_target",
        "enhancer.unet_channels",
        "enhancer.epochs",
        "enhancer.lr",
        "enhancer.weight_decay",
        "fusion.channels",
        "fusion.compact_dim",
        "fusion.beta",
        "fusion.lr",
        "fusion.weight_decay",
        "fusion.scheduler_step",
        "fusion.scheduler_factor",
        "fusion.epochs",
        "depth.lr",
        "depth.weight_decay",
        "depth.epochs",
        "depth.si_lambda",
        "eval.kinds",
    };
    return keys;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": expected `key = value`");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  /// `key=value` command-line override.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must be key=value, got: " + kv);
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) {
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      std::string msg = "unknown config key `" + key + "`; valid keys:";
      for (const auto& k : keys) msg += "\n  " + k;
      throw ConfigError(msg);
    }
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config key `" + key + "`: not a number: " + it->second);
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      size_t pos = 0;
      const std::int64_t v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config key `" + key + "`: not an integer: " + it->second);
    }
  }

  std::uint64_t seed() const {
    return static_cast<std::uint64_t>(get_int("seed", 42));
  }

  DatasetConfig dataset_config(const std::string& out_dir) const {
    DatasetConfig d;
    d.out_dir = out_dir;
    d.n_samples = static_cast<int>(get_int("dataset.n", 640));
    d.width = static_cast<int>(get_int("dataset.width", 64));
    d.height = static_cast<int>(get_int("dataset.height", 64));
    d.seed = stage_seed(seed(), "gen-data");
    d.d_min = get_double("dataset.d_min", 1.0);
    d.d_max = get_double("dataset.d_max", 20.0);
    d.train_frac = get_double("dataset.train_frac", 0.70);
    d.val_frac = get_double("dataset.val_frac", 0.15);
    d.min_objects = static_cast<int>(get_int("dataset.min_objects", 2));
    d.max_objects = static_cast<int>(get_int("dataset.max_objects", 5));
    d.w_clear = get_double("dataset.weather.clear", 0.25);
    d.w_rain = get_double("dataset.weather.rain", 0.25);
    d.w_fog = get_double("dataset.weather.fog", 0.25);
    d.w_rain_fog = get_double("dataset.weather.rain_and_fog", 0.25);
    d.event_threshold = get_double("dataset.event_threshold", 0.4);
    d.delta_t = get_double("dataset.delta_t", 0.125);
    d.fog_beta_min = get_double("dataset.fog_beta_min", 0.05);
    d.fog_beta_max = get_double("dataset.fog_beta_max", 0.3);
    d.fog_airlight = get_double("dataset.fog_airlight", 0.55);
    d.night_gain_min = get_double("dataset.night_gain_min", 0.10);
    d.night_gain_max = get_double("dataset.night_gain_max", 0.30);
    d.night_gamma_min = get_double("dataset.night_gamma_min", 1.6);
    d.night_gamma_max = get_double("dataset.night_gamma_max", 2.4);
    d.night_noise_sigma = get_double("dataset.night_noise_sigma", 0.01);
    return d;
  }

  EnhancerConfig enhancer_config() const {
    EnhancerConfig e;
    const std::string kind = get_str("enhancer.kind", "analytic");
    if (kind == "analytic")
      e.kind = EnhancerKind::analytic;
    else if (kind == "attention_unet")
      e.kind = EnhancerKind::attention_unet;
    else
      throw ConfigError("enhancer.kind must be analytic or attention_unet, got " +
                        kind);
    e.gamma_target = get_double("enhancer.gamma_target", 2.2);
    e.unet_channels = static_cast<int>(get_int("enhancer.unet_channels", 8));
    e.epochs = static_cast<int>(get_int("enhancer.epochs", 5));
    e.lr = get_double("enhancer.lr", 1e-3);
    e.weight_decay = get_double("enhancer.weight_decay", 1e-3);
    e.seed = stage_seed(seed(), "train-enhance");
    return e;
  }

  FusionConfig fusion_config() const {
    FusionConfig f;
    f.channels = static_cast<int>(get_int("fusion.channels", 32));
    f.compact_dim = static_cast<int>(get_int("fusion.compact_dim", 16));
    f.beta = get_double("fusion.beta", 0.8);
    f.lr = get_double("fusion.lr", 1e-3);
    f.weight_decay = get_double("fusion.weight_decay", 1e-3);
    f.scheduler_step = static_cast<int>(get_int("fusion.scheduler_step", 5));
    f.scheduler_factor = get_double("fusion.scheduler_factor", 0.5);
    f.epochs = static_cast<int>(get_int("fusion.epochs", 100));
    f.seed = stage_seed(seed(), "train-fusion");
    return f;
  }

  DepthConfig depth_config() const {
    DepthConfig d;
    d.d_min = get_double("dataset.d_min", 1.0);
    d.d_max = get_double("dataset.d_max", 20.0);
    d.lr = get_double("depth.lr", 1e-4);
    d.weight_decay = get_double("depth.weight_decay", 1e-3);
    d.epochs = static_cast<int>(get_int("depth.epochs", 40));
    d.si_lambda = get_double("depth.si_lambda", 0.5);
    d.seed = stage_seed(seed(), "train-depth");
    return d;
  }

  std::vector<InputKind> eval_kinds() const {
    const std::string raw = get_str("eval.kinds", "rgb,event,even");
    std::vector<InputKind> out;
    std::istringstream is(raw);
    std::string item;
    while (std::getline(is, item, ','))
      if (!trim(item).empty()) out.push_back(input_kind_from_string(trim(item)));
    if (out.empty()) throw ConfigError("eval.kinds: empty list");
    return out;
  }

  /// Every key, explicit or defaulted, in file format; replaying this file
  /// reproduces the run.
  std::string resolved() const {
    RunConfig full = *this;
    auto put = [&](const std::string& k, const std::string& v) {
      if (!full.has(k)) full.values_[k] = v;
    };
    const DatasetConfig d = dataset_config("");
    put("seed", std::to_string(seed()));
    put("dataset.n", std::to_string(d.n_samples));
    put("dataset.width", std::to_string(d.width));
    put("dataset.height", std::to_string(d.height));
    put("dataset.d_min", fmt(d.d_min));
    put("dataset.d_max", fmt(d.d_max));
    put("dataset.train_frac", fmt(d.train_frac));
    put("dataset.val_frac", fmt(d.val_frac));
    put("dataset.min_objects", std::to_string(d.min_objects));
    put("dataset.max_objects", std::to_string(d.max_objects));
    put("dataset.weather.clear", fmt(d.w_clear));
    put("dataset.weather.rain", fmt(d.w_rain));
    put("dataset.weather.fog", fmt(d.w_fog));
    put("dataset.weather.rain_and_fog", fmt(d.w_rain_fog));
    put("dataset.event_threshold", fmt(d.event_threshold));
    put("dataset.delta_t", fmt(d.delta_t));
    put("dataset.fog_beta_min", fmt(d.fog_beta_min));
    put("dataset.fog_beta_max", fmt(d.fog_beta_max));
    put("dataset.fog_airlight", fmt(d.fog_airlight));
    put("dataset.night_gain_min", fmt(d.night_gain_min));
    put("dataset.night_gain_max", fmt(d.night_gain_max));
    put("dataset.night_gamma_min", fmt(d.night_gamma_min));
    put("dataset.night_gamma_max", fmt(d.night_gamma_max));
    put("dataset.night_noise_sigma", fmt(d.night_noise_sigma));
    const EnhancerConfig e = enhancer_config();
    put("enhancer.kind",
        e.kind == EnhancerKind::analytic ? "analytic" : "attention_unet");
    put("enhancer.gamma_target", fmt(e.gamma_target));
    put("enhancer.unet_channels", std::to_string(e.unet_channels));
    put("enhancer.epochs", std::to_string(e.epochs));
    put("enhancer.lr", fmt(e.lr));
    put("enhancer.weight_decay", fmt(e.weight_decay));
    const FusionConfig f = fusion_config();
    put("fusion.channels", std::to_string(f.channels));
    put("fusion.compact_dim", std::to_string(f.compact_dim));
    put("fusion.beta", fmt(f.beta));
    put("fusion.lr", fmt(f.lr));
    put("fusion.weight_decay", fmt(f.weight_decay));
    put("fusion.scheduler_step", std::to_string(f.scheduler_step));
    put("fusion.scheduler_factor", fmt(f.scheduler_factor));
    put("fusion.epochs", std::to_string(f.epochs));
    const DepthConfig dp = depth_config();
    put("depth.lr", fmt(dp.lr));
    put("depth.weight_decay", fmt(dp.weight_decay));
    put("depth.epochs", std::to_string(dp.epochs));
    put("depth.si_lambda", fmt(dp.si_lambda));
    put("eval.kinds", get_str("eval.kinds", "rgb,event,even"));

    std::string out;
    for (const auto& [k, v] : full.values_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace even

#endif  // EVEN_CONFIG_HPP
