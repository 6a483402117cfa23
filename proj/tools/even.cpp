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

// Night-time monocular depth estimation from fused event + RGB inputs:
// dataset generation, three-phase training, baselines and reports.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "even/pipeline.hpp"

namespace {

int worker_cap() {
  const char* env = std::getenv("EVEN_NUM_WORKERS");
  if (!env || !*env) return 1;
  const int n = std::atoi(env);
  if (n < 1) {
    std::fprintf(stderr, "warning: ignoring EVEN_NUM_WORKERS=%s (need >= 1)\n",
                 env);
    return 1;
  }
  return n;
}

even::InputKind parse_kind(const std::string& s) {
  try {
    return even::input_kind_from_string(s);
  } catch (const std::exception& e) {
    throw even::ConfigError(e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"even: event + RGB night-time depth estimation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed = -1;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "configuration file (key = value lines)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (default: out)");
  app.add_option("--seed", seed, "global seed, overrides the config value");
  app.add_option("--set", overrides, "config override, key=value (repeatable)");

  std::string fusion_kind = "even";
  std::string depth_kind = "even";
  auto* c_gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  auto* c_enh = app.add_subcommand("train-enhance", "phase 1: train the enhancer");
  auto* c_fus = app.add_subcommand("train-fusion", "phase 2: train a fusion net");
  c_fus->add_option("--kind", fusion_kind,
                    "fused input kind (even, rgb+sobel, rgb+event, enhanced+sobel)");
  auto* c_exp = app.add_subcommand("export-fusion",
                                   "write fusion_even.png into each sample dir");
  auto* c_dep = app.add_subcommand("train-depth", "phase 3: train a depth net");
  c_dep->add_option("--kind", depth_kind, "input kind to train on");
  auto* c_evl = app.add_subcommand("eval", "metric table on the test split");
  auto* c_bas = app.add_subcommand("baselines", "full seven-row input-kind matrix");
  auto* c_cvl = app.add_subcommand("crossval", "two-fold weather cross-validation");
  auto* c_all = app.add_subcommand("all", "run every phase in dependency order");

  CLI11_PARSE(app, argc, argv);

  try {
    even::RunConfig cfg;
    if (!config_path.empty()) cfg = even::RunConfig::from_file(config_path);
    for (const auto& kv : overrides) cfg.apply_override(kv);
    if (seed >= 0) cfg.set("seed", std::to_string(seed));

    even::Pipeline pipe(out_dir, cfg, worker_cap());
    if (c_gen->parsed()) pipe.gen_data();
    if (c_enh->parsed()) pipe.train_enhance();
    if (c_fus->parsed())
      pipe.train_fusion_stage(parse_kind(fusion_kind));
    if (c_exp->parsed()) pipe.export_fusion();
    if (c_dep->parsed())
      pipe.train_depth_stage(parse_kind(depth_kind));
    if (c_evl->parsed()) pipe.eval(cfg.eval_kinds());
    if (c_bas->parsed()) pipe.baselines();
    if (c_cvl->parsed()) pipe.crossval();
    if (c_all->parsed()) pipe.all();
    return 0;
  } catch (const even::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const even::MissingDependencyError& e) {
    std::fprintf(stderr, "missing dependency: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
