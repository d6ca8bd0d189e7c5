/* Copyright 2026 The IGBP Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// igbp: command-line front end for the concept-erasure library.
// Exit codes: 0 success, 1 internal or numeric failure, 2 usage or input error.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using igbp::cli::json;

struct Flag {
  std::string value;
  const char* key;
};

int run(int argc, char** argv) {
  CLI::App app{"Erase a protected attribute from vector representations by iterated probe-boundary projection."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  std::vector<std::string> sets;
  std::vector<Flag> flags;
  flags.reserve(16);
  auto flag = [&](CLI::App* target, const std::string& name, const char* key, const std::string& help) {
    flags.push_back({"", key});
    target->add_option(name, flags.back().value, help);
  };
  app.add_option("--config", config_path, "JSON configuration file");
  flag(&app, "--seed", "seed", "Run seed (required)");
  flag(&app, "--out-dir", "out_dir", "Directory for output files");
  flag(&app, "--threads", "threads", "Worker threads (results do not depend on this)");
  app.add_option("--set", sets, "Override any configuration key: --set train.lr=0.001 (repeatable)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with train/dev/test splits");
  flag(synth, "--kind", "synth.kind", "linear-gaussian, xor, concentric or mixed");

  auto* debias = app.add_subcommand("debias", "Iterated projection onto probe decision boundaries");
  flag(debias, "--data", "data.path", "Input dataset");
  flag(debias, "--arch", "probe.arch", "Probe architecture: linear or mlp:W1,W2 (Nx scales the input dim)");

  auto* inlp = app.add_subcommand("inlp", "Iterated null-space projection with linear probes");
  flag(inlp, "--data", "data.path", "Input dataset");

  auto* apply = app.add_subcommand("apply", "Apply a saved projection stack to new vectors");
  flag(apply, "--stack", "apply.stack", "Projection stack file");
  flag(apply, "--input", "apply.input", "Dataset to transform");
  flag(apply, "--output", "apply.output", "Output path (default <out-dir>/applied.embd)");

  auto* eval = app.add_subcommand("eval", "Main-task accuracy, TPR gap, leakage and MDL compression");
  flag(eval, "--data", "data.path", "Dataset to evaluate");

  auto* weat_cmd = app.add_subcommand("weat", "Word embedding association test");
  flag(weat_cmd, "--embeddings", "weat.embeddings", "Word vectors, one 'word v1 ... vd' per line");
  flag(weat_cmd, "--stack", "weat.stack", "Optional projection stack applied to the vectors first");

  auto* sweep = app.add_subcommand("sweep", "Grid over probe architectures and iteration counts");
  flag(sweep, "--data", "data.path", "Input dataset");

  auto* probe = app.add_subcommand("probe", "Train one probe and report its accuracy per split");
  flag(probe, "--data", "data.path", "Input dataset");
  flag(probe, "--arch", "probe.arch", "Probe architecture");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  igbp::cli::ConfigBuilder builder;
  if (!config_path.empty()) builder.merge_file(config_path);
  builder.merge_env();
  for (const auto& f : flags)
    if (!f.value.empty()) builder.set_text(f.key, f.value);
  for (const auto& s : sets) builder.set_assignment(s);
  const json& cfg = builder.get();

  igbp::set_num_threads(static_cast<unsigned>(std::max<std::size_t>(1, cfg.at("threads").get<std::size_t>())));

  std::ostream& out = std::cout;
  if (synth->parsed()) return igbp::cli::cmd_synth(cfg, out);
  if (debias->parsed()) return igbp::cli::cmd_debias(cfg, out, igbp::ProjectionMethod::kGradient);
  if (inlp->parsed()) return igbp::cli::cmd_debias(cfg, out, igbp::ProjectionMethod::kNullspace);
  if (apply->parsed()) return igbp::cli::cmd_apply(cfg, out);
  if (eval->parsed()) return igbp::cli::cmd_eval(cfg, out);
  if (weat_cmd->parsed()) return igbp::cli::cmd_weat(cfg, out);
  if (sweep->parsed()) return igbp::cli::cmd_sweep(cfg, out);
  if (probe->parsed()) return igbp::cli::cmd_probe(cfg, out);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const igbp::InputError& e) {
    std::cerr << "igbp: error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "igbp: error: configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "igbp: internal error: " << e.what() << "\n";
    return 1;
  }
}
