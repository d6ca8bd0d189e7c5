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
#pragma once

// Subcommand implementations. Each command reads a fully merged
// configuration, computes everything in memory, and only then writes its
// output files (each atomically), so a failing command leaves no partial
// results behind.

#include <algorithm>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "igbp/igbp.hpp"

namespace igbp::cli {

namespace fs = std::filesystem;

// Seed streams derived from the run seed, one per independent consumer.
inline constexpr std::uint64_t kSplitStream = 0x5101;
inline constexpr std::uint64_t kAdversaryStream = 0xAD01;
inline constexpr std::uint64_t kMdlStream = 0x3D01;
inline constexpr std::uint64_t kProbeStream = 0x9B01;
inline constexpr std::uint64_t kWeatStream = 0x3E01;
inline constexpr std::uint64_t kBaselineStream = 0xBA01;
inline constexpr std::uint64_t kMainHeadStream = 0x3A01;

// Files produced by a command, written together at the end.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}
  void add(const std::string& name, std::string bytes) { files_.emplace_back(dir_ / name, std::move(bytes)); }
  void add_path(fs::path path, std::string bytes) { files_.emplace_back(std::move(path), std::move(bytes)); }
  void commit(std::ostream& log) const {
    for (const auto& [path, bytes] : files_) io::write_file_atomic(path, bytes);
    log << "wrote " << files_.size() << " file(s) to " << dir_.string() << "\n";
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, std::string>> files_;
};

inline fs::path out_dir(const json& cfg) { return fs::path(cfg.at("out_dir").get<std::string>()); }

inline bool text_output(const json& cfg) {
  const auto f = cfg.at("data").at("output_format").get<std::string>();
  if (f != "binary" && f != "text") throw ConfigError("data.output_format must be 'binary' or 'text'");
  return f == "text";
}

inline std::string dataset_bytes(const Dataset& ds, bool text) { return text ? format_delimited(ds) : format_embd(ds); }
inline std::string dataset_ext(bool text) { return text ? ".csv" : ".embd"; }

inline Dataset subset_dataset(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.x = take_rows(ds.x, rows);
  out.z_continuous = ds.z_continuous;
  for (auto r : rows) {
    out.y.push_back(ds.y[r]);
    out.z.push_back(ds.z[r]);
    if (!ds.ids.empty()) out.ids.push_back(ds.ids[r]);
    if (ds.has_splits()) out.split.push_back(ds.split[r]);
  }
  return out;
}

inline std::string required_path(const json& cfg, const char* section, const char* key) {
  const auto v = cfg.at(section).at(key).get<std::string>();
  if (v.empty()) throw ConfigError(std::string(section) + "." + key + " is required");
  return v;
}

inline Dataset load_input(const json& cfg, std::uint64_t seed) {
  const auto path = required_path(cfg, "data", "path");
  Dataset ds = load_dataset(path, parse_format(cfg.at("data").at("format").get<std::string>()));
  if (!ds.has_splits()) ds = split_dataset(std::move(ds), split_ratios(cfg.at("data").at("split")), derive_seed(seed, kSplitStream));
  return ds;
}

// The split metrics are reported on: test, else dev, else train.
inline SplitData eval_split(const Dataset& ds) {
  for (Split s : {Split::kTest, Split::kDev}) {
    auto rows = ds.indices(s);
    if (!rows.empty()) return ds.subset(std::move(rows));
  }
  return ds.view(Split::kTrain);
}

// Main-task classifier used for accuracy and TPR gap: the logistic head, or
// for binary y an MLP ("mlp:W1,...") trained with the `train` settings, which
// can also pick up non-linearly encoded attributes.
class MainHead {
 public:
  MainHead(const json& cfg, std::uint64_t seed)
      : spec_(cfg.at("main_task").at("head").get<std::string>()),
        logistic_(main_task_config(cfg.at("main_task"))),
        train_(train_config(cfg.at("train"))),
        seed_(derive_seed(seed, kMainHeadStream)) {
    if (spec_ != "logistic") parse_architecture(spec_, 1);
  }

  std::vector<int> fit_predict(const SplitData& train, const SplitData& eval) const {
    if (spec_ == "logistic") return LogisticHead::fit(train.x, train.y, logistic_).predict(eval.x);
    std::vector<double> labels;
    for (int y : train.y) {
      if (y != 0 && y != 1) throw ConfigError("main_task.head '" + spec_ + "' needs binary y labels");
      labels.push_back(static_cast<double>(y));
    }
    Rng rng(seed_);
    const Probe p = train_probe(train.x, labels, parse_architecture(spec_, train.x.cols()), train_, rng);
    std::vector<int> out;
    for (double f : forward_batch(p, eval.x)) out.push_back(f > 0.0 ? 1 : 0);
    return out;
  }

  MainTaskEval as_eval() const {
    return [head = *this](const SplitData& train, const SplitData& eval) {
      const auto pred = head.fit_predict(train, eval);
      std::size_t hit = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == eval.y[i];
      return pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
    };
  }

 private:
  std::string spec_;
  LogisticConfig logistic_;
  TrainConfig train_;
  std::uint64_t seed_;
};

struct TaskMetrics {
  double accuracy = 0.0;  // main-task accuracy on the evaluation split
  FairnessReport fairness;
};

inline TaskMetrics main_task_metrics(const Dataset& ds, const MainHead& head) {
  const auto train = ds.view(Split::kTrain);
  const auto eval = eval_split(ds);
  const auto pred = head.fit_predict(train, eval);
  TaskMetrics m;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == eval.y[i];
  m.accuracy = pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
  if (!ds.z_continuous) m.fairness = tpr_gap(eval.y, pred, eval.z);
  return m;
}

inline LeakageSummary adversary_leakage(const Dataset& ds, const json& cfg, std::uint64_t seed) {
  const auto& adv = cfg.at("adversary");
  const auto arch = parse_architecture(adv.at("arch").get<std::string>(), ds.dim());
  const auto runs = adv.at("runs").get<std::size_t>();
  if (runs < 1) throw ConfigError("adversary.runs must be >= 1");
  const auto train = ds.view(Split::kTrain);
  const auto eval = eval_split(ds);
  return leakage_repeated(train.x, train.z, eval.x, eval.z, arch, train_config(adv.at("train")),
                          derive_seed(seed, kAdversaryStream), runs);
}

// ---------------------------------------------------------------------------
// synth

inline int cmd_synth(const json& cfg, std::ostream& out) {
  const auto seed = required_seed(cfg);
  const auto spec = synth_spec(cfg.at("synth"), seed);
  const bool text = text_output(cfg);
  const Dataset ds = generate_synthetic(spec);
  double ones = 0.0;
  for (double z : ds.z) ones += z;
  out << "generator " << synth_kind_name(spec.kind) << ", dim " << spec.dim << ", rows " << ds.size() << " (train "
      << spec.n_train << ", dev " << spec.n_dev << ", test " << spec.n_test << "), z rate "
      << io::fixed(ones / static_cast<double>(ds.size()), 4) << "\n";
  OutputSet files(out_dir(cfg));
  files.add("data" + dataset_ext(text), dataset_bytes(ds, text));
  files.commit(out);
  return 0;
}

// ---------------------------------------------------------------------------
// debias / inlp

inline int cmd_debias(const json& cfg, std::ostream& out, ProjectionMethod method) {
  const auto seed = required_seed(cfg);
  const bool text = text_output(cfg);
  const auto train = train_config(cfg.at("train"));
  const auto stop = stop_config(cfg.at("stop"));
  const auto main_eval = MainHead(cfg, seed).as_eval();
  ErasureOptions opts;
  opts.eps_grad = cfg.at("projection").at("eps_grad").get<double>();
  if (!(opts.eps_grad > 0.0)) throw ConfigError("projection.eps_grad must be > 0");
  const Dataset ds = load_input(cfg, seed);

  ErasureResult r;
  if (method == ProjectionMethod::kNullspace) {
    r = inlp_run(ds, train, stop, seed, main_eval, opts);
  } else {
    const auto mode = ds.z_continuous ? ProbeMode::kRegressor : ProbeMode::kClassifier;
    const auto arch = parse_architecture(cfg.at("probe").at("arch").get<std::string>(), ds.dim(), mode);
    r = igbp_run(ds, arch, train, stop, seed, main_eval, opts);
  }

  std::string table = r.report.to_table();
  table += "stop reason: " + std::string(stop_reason_name(r.report.stop_reason)) + "\n";
  table += "probes applied: " + std::to_string(r.stack.probes.size()) + "\n";
  out << table;

  OutputSet files(out_dir(cfg));
  files.add("clean" + dataset_ext(text), dataset_bytes(r.clean, text));
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
    const auto rows = r.clean.indices(s);
    if (rows.empty()) continue;
    files.add(std::string("clean_") + split_name(s) + dataset_ext(text), dataset_bytes(subset_dataset(r.clean, rows), text));
  }
  files.add("stack.igbp", stack_to_bytes(r.stack));
  files.add("report.txt", table);
  files.add("report.csv", r.report.to_csv());
  files.commit(out);
  return 0;
}

// ---------------------------------------------------------------------------
// apply

inline int cmd_apply(const json& cfg, std::ostream& out) {
  const bool text = text_output(cfg);
  const auto stack_path = resolve_data_path(required_path(cfg, "apply", "stack"));
  const auto input_path = required_path(cfg, "apply", "input");
  if (!fs::exists(stack_path)) throw InputError("stack file not found: " + stack_path.string());
  const ProjectionStack stack = stack_from_bytes(io::read_file(stack_path));
  Dataset ds = load_dataset(input_path, parse_format(cfg.at("data").at("format").get<std::string>()));
  ds.x = apply_stack(stack, ds.x);
  const double again = reapplication_distance(stack, ds.x);

  MetricReport rep;
  rep.add("rows", static_cast<double>(ds.size()));
  rep.add("dim", static_cast<double>(ds.dim()));
  rep.add("probes", static_cast<double>(stack.probes.size()));
  rep.add("reapplication_distance", again);
  out << rep.to_table();

  std::string output = cfg.at("apply").at("output").get<std::string>();
  OutputSet files(out_dir(cfg));
  if (output.empty()) files.add("applied" + dataset_ext(text), dataset_bytes(ds, text));
  else files.add_path(output, dataset_bytes(ds, text));
  files.add("apply_report.txt", rep.to_table());
  files.add("apply_report.csv", rep.to_csv());
  files.commit(out);
  return 0;
}

// ---------------------------------------------------------------------------
// eval

inline int cmd_eval(const json& cfg, std::ostream& out) {
  const auto seed = required_seed(cfg);
  const auto metrics = cfg.at("eval").at("metrics").get<std::vector<std::string>>();
  const std::set<std::string> known{"accuracy", "gap", "leakage", "mdl"};
  if (metrics.empty()) throw ConfigError("eval.metrics is empty");
  for (const auto& m : metrics)
    if (!known.count(m)) throw ConfigError("unknown metric '" + m + "' (expected accuracy, gap, leakage or mdl)");
  const Dataset ds = load_input(cfg, seed);
  const std::string baseline_path = cfg.at("eval").at("baseline").get<std::string>();
  std::optional<Dataset> baseline;
  if (!baseline_path.empty()) {
    json bcfg = cfg;
    bcfg["data"]["path"] = baseline_path;
    baseline = load_input(bcfg, seed);
  }

  MetricReport rep;
  const auto eval = eval_split(ds);
  rep.add("rows_evaluated", static_cast<double>(eval.x.rows()));
  std::optional<TaskMetrics> task;
  for (const auto& m : metrics) {
    if (m == "accuracy" || m == "gap") {
      if (!task) task = main_task_metrics(ds, MainHead(cfg, seed));
      if (m == "accuracy") {
        rep.add("main_accuracy", task->accuracy);
      } else {
        if (ds.z_continuous) throw InputError("gap needs a binary protected attribute");
        rep.add("tpr_gap_rms", task->fairness.rms_gap);
        for (const auto& g : task->fairness.classes)
          if (!g.excluded) rep.add("tpr_gap_class_" + std::to_string(g.label), g.gap);
        rep.add("tpr_gap_flagged_classes", static_cast<double>(task->fairness.flagged.size()));
      }
    } else if (m == "leakage") {
      const auto s = adversary_leakage(ds, cfg, seed);
      rep.add("leakage_majority", 100.0 * majority_rate(eval.z));
      rep.add("leakage", s.mean);
      if (s.runs.size() >= 2) rep.add("leakage_sd", s.sd);
      if (baseline) {
        const auto b = adversary_leakage(*baseline, cfg, derive_seed(seed, kBaselineStream));
        rep.add("baseline_leakage", b.mean);
        if (s.runs.size() >= 2) {
          try {
            rep.add("leakage_welch_t", welch_t(s.runs, b.runs));
          } catch (const NumericError&) {
            // identical constant runs: no t statistic to report
          }
        }
      }
    } else if (m == "mdl") {
      const auto train = ds.view(Split::kTrain);
      const auto arch = parse_architecture(cfg.at("eval").at("mdl_arch").get<std::string>(), ds.dim());
      Rng rng(derive_seed(seed, kMdlStream));
      const auto r = mdl_compression(train.x, train.z, eval.x, eval.z, arch,
                                     cfg.at("eval").at("mdl_fractions").get<std::vector<double>>(),
                                     train_config(cfg.at("adversary").at("train")), rng);
      rep.add("mdl_compression", r.compression);
      rep.add("mdl_online_bits", r.online_bits);
      rep.add("mdl_uniform_bits", r.uniform_bits);
    }
  }
  out << rep.to_table();
  OutputSet files(out_dir(cfg));
  files.add("metrics.txt", rep.to_table());
  files.add("metrics.csv", rep.to_csv());
  files.commit(out);
  return 0;
}

// ---------------------------------------------------------------------------
// weat

inline int cmd_weat(const json& cfg, std::ostream& out) {
  const auto seed = required_seed(cfg);
  const auto& w = cfg.at("weat");
  WordEmbeddings emb = load_word_vectors(required_path(cfg, "weat", "embeddings"));
  std::vector<std::vector<std::string>> sets;
  for (const char* k : {"x", "y", "a", "b"}) sets.push_back(load_word_list(required_path(cfg, "weat", k)));
  const std::string stack_path = w.at("stack").get<std::string>();
  if (!stack_path.empty()) {
    const auto resolved = resolve_data_path(stack_path);
    if (!fs::exists(resolved)) throw InputError("stack file not found: " + resolved.string());
    emb.vectors = apply_stack(stack_from_bytes(io::read_file(resolved)), emb.vectors);
  }
  const auto r = weat(sets[0], sets[1], sets[2], sets[3], emb, w.at("exact_threshold").get<std::uint64_t>(),
                      w.at("mc_draws").get<std::size_t>(), derive_seed(seed, kWeatStream));
  MetricReport rep;
  rep.add("effect_size", r.effect_size);
  rep.add("p_value", r.p_value);
  rep.add("permutations", static_cast<double>(r.permutations));
  rep.add("exact", r.exact ? 1.0 : 0.0);
  out << rep.to_table();
  OutputSet files(out_dir(cfg));
  files.add("weat.txt", rep.to_table());
  files.add("weat.csv", rep.to_csv());
  files.commit(out);
  return 0;
}

// ---------------------------------------------------------------------------
// probe

inline int cmd_probe(const json& cfg, std::ostream& out) {
  const auto seed = required_seed(cfg);
  const auto train_cfg = train_config(cfg.at("train"));
  const Dataset ds = load_input(cfg, seed);
  const auto mode = ds.z_continuous ? ProbeMode::kRegressor : ProbeMode::kClassifier;
  const auto arch = parse_architecture(cfg.at("probe").at("arch").get<std::string>(), ds.dim(), mode);
  const auto train = ds.view(Split::kTrain);
  Rng rng(derive_seed(seed, kProbeStream));
  const Probe p = train_probe(train.x, train.z, arch, train_cfg, rng);

  MetricReport rep;
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
    const auto v = ds.view(s);
    if (v.rows.empty()) continue;
    if (ds.z_continuous) {
      const auto pred = forward_batch(p, v.x);
      double se = 0.0;
      for (std::size_t i = 0; i < pred.size(); ++i) se += (pred[i] - v.z[i]) * (pred[i] - v.z[i]);
      rep.add(std::string(split_name(s)) + "_mse", se / static_cast<double>(pred.size()));
    } else {
      rep.add(std::string(split_name(s)) + "_accuracy", accuracy(p, v.x, v.z));
      rep.add(std::string(split_name(s)) + "_majority", majority_rate(v.z));
    }
  }
  out << "architecture " << arch.name() << "\n" << rep.to_table();
  std::ostringstream probe_bytes(std::ios::binary);
  write_probe(probe_bytes, p);
  OutputSet files(out_dir(cfg));
  files.add("probe.bin", probe_bytes.str());
  files.add("probe_report.txt", rep.to_table());
  files.add("probe_report.csv", rep.to_csv());
  files.commit(out);
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepPoint {
  std::string arch;
  std::size_t seed_index = 0;
  std::size_t iteration = 0;
  double accuracy = 0.0;  // main task, fraction
  double gap = 0.0;       // RMS TPR gap
  double leakage = 0.0;   // adversary, percent
};

// Runs every (architecture, seed) cell to the largest requested iteration
// count and records the metrics of the representation after each requested
// count. A run that stops early keeps its final representation for the
// remaining counts, which is what running it with that budget would return.
inline std::vector<SweepPoint> run_sweep(const Dataset& ds, const json& cfg, std::uint64_t seed) {
  const auto& sw = cfg.at("sweep");
  const auto archs = sw.at("archs").get<std::vector<std::string>>();
  auto iterations = sw.at("iterations").get<std::vector<std::size_t>>();
  const auto seeds = sw.at("seeds").get<std::size_t>();
  if (archs.empty() || iterations.empty() || seeds == 0) throw ConfigError("sweep grid is empty");
  std::sort(iterations.begin(), iterations.end());
  iterations.erase(std::unique(iterations.begin(), iterations.end()), iterations.end());
  const std::size_t max_iter = iterations.back();

  const auto train = train_config(cfg.at("train"));
  StoppingCriteria stop = stop_config(cfg.at("stop"));
  const MainHead head(cfg, seed);
  ErasureOptions opts;
  opts.eps_grad = cfg.at("projection").at("eps_grad").get<double>();
  const auto mode = ds.z_continuous ? ProbeMode::kRegressor : ProbeMode::kClassifier;
  if (ds.z_continuous) throw InputError("sweep reports TPR gap and leakage, which need a binary attribute");
  std::vector<ProbeArchitecture> parsed;
  for (const auto& a : archs) parsed.push_back(parse_architecture(a, ds.dim(), mode));

  std::vector<SweepPoint> points;
  for (std::size_t ai = 0; ai < archs.size(); ++ai) {
    for (std::size_t k = 0; k < seeds; ++k) {
      const std::uint64_t cell_seed = derive_seed(seed, k);
      auto measure = [&](const Dataset& cur, std::size_t it) {
        const auto task = main_task_metrics(cur, head);
        const auto leak = adversary_leakage(cur, cfg, derive_seed(cell_seed, it));
        return SweepPoint{archs[ai], k, it, task.accuracy, task.fairness.rms_gap, leak.mean};
      };
      std::size_t next = 0;  // index into `iterations`
      if (iterations[0] == 0) points.push_back(measure(ds, 0)), ++next;
      if (max_iter == 0) continue;
      stop.max_iterations = max_iter;
      opts.on_iteration = [&](const ReportRow& row, const Dataset& cur) {
        if (next < iterations.size() && iterations[next] == row.iteration) {
          points.push_back(measure(cur, row.iteration));
          ++next;
        }
      };
      const auto r = igbp_run(ds, parsed[ai], train, stop, cell_seed, head.as_eval(), opts);
      if (next < iterations.size()) {
        SweepPoint last = measure(r.clean, iterations[next]);
        for (; next < iterations.size(); ++next) {
          last.iteration = iterations[next];
          points.push_back(last);
        }
      }
    }
  }
  return points;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& pts) {
  std::ostringstream os;
  os << "arch,seed,iteration,accuracy,gap,leakage\n";
  for (const auto& p : pts)
    os << p.arch << ',' << p.seed_index << ',' << p.iteration << ',' << io::format_double(p.accuracy) << ','
       << io::format_double(p.gap) << ',' << io::format_double(p.leakage) << '\n';
  return os.str();
}

// Means over seeds per (arch, iteration), in first-seen arch order.
inline std::string sweep_table(const std::vector<SweepPoint>& pts) {
  std::vector<std::string> order;
  std::map<std::pair<std::string, std::size_t>, std::array<double, 4>> acc;  // sum acc, gap, leak, count
  for (const auto& p : pts) {
    if (std::find(order.begin(), order.end(), p.arch) == order.end()) order.push_back(p.arch);
    auto& a = acc[{p.arch, p.iteration}];
    a[0] += p.accuracy;
    a[1] += p.gap;
    a[2] += p.leakage;
    a[3] += 1.0;
  }
  std::ostringstream os;
  os << "arch              iter  accuracy       gap   leakage  seeds\n";
  for (const auto& arch : order) {
    for (const auto& [key, a] : acc) {
      if (key.first != arch) continue;
      char buf[160];
      std::snprintf(buf, sizeof buf, "%-16s  %4zu  %8.5f  %8.5f  %8.3f  %5.0f\n", arch.c_str(), key.second,
                    a[0] / a[3], a[1] / a[3], a[2] / a[3], a[3]);
      os << buf;
    }
  }
  return os.str();
}

inline int cmd_sweep(const json& cfg, std::ostream& out) {
  const auto seed = required_seed(cfg);
  const Dataset ds = load_input(cfg, seed);
  const auto pts = run_sweep(ds, cfg, seed);
  const std::string table = sweep_table(pts);
  out << table;
  OutputSet files(out_dir(cfg));
  files.add("sweep.csv", sweep_csv(pts));
  files.add("sweep.txt", table);
  files.commit(out);
  return 0;
}

}  // namespace igbp::cli
