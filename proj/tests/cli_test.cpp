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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "igbp/igbp.hpp"

namespace igbp {
namespace {

namespace fs = std::filesystem;
using cli::json;

// ---------------------------------------------------------------------------
// Configuration layering (in-process)

TEST(Config, SeedIsMandatory) {
  cli::ConfigBuilder b;
  EXPECT_THROW(cli::required_seed(b.get()), ConfigError);
  b.set_text("seed", "17");
  EXPECT_EQ(cli::required_seed(b.get()), 17u);
}

TEST(Config, UnknownKeysAreRejectedInEveryLayer) {
  cli::ConfigBuilder b;
  EXPECT_THROW(b.merge(json::parse(R"({"train": {"learning_rate": 0.1}})")), ConfigError);
  EXPECT_THROW(b.merge(json::parse(R"({"bogus": 1})")), ConfigError);
  EXPECT_THROW(b.set_assignment("train.learning_rate=0.1"), ConfigError);
  EXPECT_THROW(b.set_assignment("train=3"), ConfigError);
  EXPECT_THROW(b.set_assignment("noequals"), ConfigError);
  EXPECT_THROW(b.set_assignment("train..lr=1"), ConfigError);
}

TEST(Config, ValuesAreTypeChecked) {
  cli::ConfigBuilder b;
  EXPECT_THROW(b.set_assignment("train.lr=fast"), ConfigError);
  EXPECT_THROW(b.set_assignment("train.epochs=-1"), ConfigError);
  EXPECT_THROW(b.set_assignment("train.epochs=2.5"), ConfigError);
  EXPECT_THROW(b.set_assignment("seed=1.5"), ConfigError);
  EXPECT_THROW(b.set_assignment("stop.use_probe_rule=yes"), ConfigError);
  EXPECT_THROW(b.set_assignment("sweep.archs=[1,2]"), ConfigError);
  EXPECT_THROW(b.merge(json::parse(R"({"train": 3})")), ConfigError);
  b.set_assignment("train.lr=1");  // an integer is a valid number
  EXPECT_EQ(b.get()["train"]["lr"].get<double>(), 1.0);
  b.set_assignment(R"(sweep.archs=["linear","mlp:4"])");
  EXPECT_EQ(b.get()["sweep"]["archs"].size(), 2u);
}

TEST(Config, StringKeysTakeFlagTextVerbatim) {
  cli::ConfigBuilder b;
  b.set_text("data.path", "123");
  b.set_assignment("out_dir=[odd]");
  EXPECT_EQ(b.get()["data"]["path"], "123");
  EXPECT_EQ(b.get()["out_dir"], "[odd]");
}

TEST(Config, LaterLayersTakePrecedence) {
  const fs::path file = fs::temp_directory_path() / "igbp_cli_precedence.json";
  {
    std::ofstream(file) << R"({"seed": 1, "train": {"lr": 0.1, "epochs": 7}})";
  }
  std::map<std::string, std::string> env{{"IGBP_TRAIN_LR", "0.2"}, {"IGBP_STOP_MAX_ITERATIONS", "4"}};
  auto getenv = [&](const char* n) -> const char* {
    auto it = env.find(n);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  cli::ConfigBuilder b;
  b.merge_file(file);
  EXPECT_EQ(b.get()["train"]["lr"].get<double>(), 0.1);
  b.merge_env(getenv);
  EXPECT_EQ(b.get()["train"]["lr"].get<double>(), 0.2);
  EXPECT_EQ(b.get()["train"]["epochs"].get<int>(), 7);
  EXPECT_EQ(b.get()["stop"]["max_iterations"].get<int>(), 4);
  b.set_assignment("train.lr=0.3");
  EXPECT_EQ(b.get()["train"]["lr"].get<double>(), 0.3);
  fs::remove(file);
}

TEST(Config, BadEnvironmentValueNamesTheVariable) {
  auto getenv = [](const char* n) -> const char* { return std::string(n) == "IGBP_THREADS" ? "many" : nullptr; };
  cli::ConfigBuilder b;
  try {
    b.merge_env(getenv);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("IGBP_THREADS"), std::string::npos);
  }
}

TEST(Config, EnvironmentNamesAreUniformAndDistinct) {
  std::set<std::string> names;
  for (const auto& key : cli::config_keys()) {
    const auto n = cli::env_name(key);
    EXPECT_EQ(n.rfind("IGBP_", 0), 0u);
    EXPECT_NE(n, kDataRootEnv);
    EXPECT_TRUE(names.insert(n).second) << n;
  }
  EXPECT_EQ(cli::env_name("train.batch_size"), "IGBP_TRAIN_BATCH_SIZE");
}

TEST(Config, MissingOrInvalidFileIsAnInputError) {
  cli::ConfigBuilder b;
  EXPECT_THROW(b.merge_file("/nonexistent/igbp.json"), InputError);
  const fs::path file = fs::temp_directory_path() / "igbp_cli_invalid.json";
  {
    std::ofstream(file) << "{ not json";
  }
  EXPECT_THROW(b.merge_file(file), ConfigError);
  fs::remove(file);
}

TEST(Config, DefaultsMatchTheLibraryDefaults) {
  const json d = cli::default_config();
  const TrainConfig t = cli::train_config(d["train"]), ref;
  EXPECT_EQ(t.lr, ref.lr);
  EXPECT_EQ(t.batch_size, ref.batch_size);
  EXPECT_EQ(t.epochs, ref.epochs);
  EXPECT_EQ(t.patience, ref.patience);
  EXPECT_EQ(t.dev_fraction, ref.dev_fraction);
  const StoppingCriteria s = cli::stop_config(d["stop"]), sref;
  EXPECT_EQ(s.probe_acc_margin, sref.probe_acc_margin);
  EXPECT_EQ(s.main_acc_floor_ratio, sref.main_acc_floor_ratio);
  EXPECT_EQ(s.max_iterations, sref.max_iterations);
  EXPECT_EQ(d["eval"]["mdl_fractions"].get<std::vector<double>>(), default_mdl_fractions());
  EXPECT_EQ(cli::synth_spec(d["synth"], 99).seed, 99u);
  EXPECT_EQ(d["sweep"]["seeds"].get<int>(), 5);
}

TEST(Config, TypedViewsValidate) {
  json d = cli::default_config();
  d["train"]["select_by"] = "vibes";
  EXPECT_THROW(cli::train_config(d["train"]), ConfigError);
  d = cli::default_config();
  d["stop"]["max_iterations"] = 0;
  EXPECT_THROW(cli::stop_config(d["stop"]), ConfigError);
  d = cli::default_config();
  d["data"]["split"] = {0.5, 0.5};
  EXPECT_THROW(cli::split_ratios(d["data"]["split"]), ConfigError);
}

// ---------------------------------------------------------------------------
// The binary

class Workspace {
 public:
  Workspace() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("igbp_cli_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    // Desk-scale training so every command finishes in seconds.
    write("desk.json", R"({
      "train": {"lr": 0.005, "batch_size": 64, "epochs": 30, "patience": 5},
      "adversary": {"arch": "mlp:32,32", "train": {"lr": 0.005, "batch_size": 64, "epochs": 30, "patience": 5}}
    })");
  }
  ~Workspace() { fs::remove_all(dir_); }

  fs::path operator/(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
  }

  // Runs the CLI inside the workspace; returns the exit code.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + IGBP_CLI_PATH + "' " + args +
                            " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const { return io::read_file(dir_ / name); }

  std::string stderr_text() const { return read("stderr.txt"); }

 private:
  fs::path dir_;
};

std::map<std::string, double> metrics_csv(const std::string& text) {
  std::map<std::string, double> out;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "metric,value");
  while (std::getline(is, line)) {
    const auto c = line.find(',');
    out[line.substr(0, c)] = std::stod(line.substr(c + 1));
  }
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) rows.push_back(detail::split_line(line, ','));
  return rows;
}

const char* kSynthXor =
    "synth --set synth.kind=xor --set synth.dim=6 --set synth.n_train=2000 --set synth.n_dev=500 "
    "--set synth.n_test=500 --set synth.xor_margin=0.5";
const char* kSynthLinear =
    "synth --set synth.kind=linear-gaussian --set synth.dim=8 --set synth.n_train=2000 --set synth.n_dev=500 "
    "--set synth.n_test=500";

TEST(Binary, HelpAndUsageErrors) {
  Workspace ws;
  EXPECT_EQ(ws.run("--help"), 0);
  EXPECT_NE(ws.read("stdout.txt").find("debias"), std::string::npos);
  EXPECT_EQ(ws.run(""), 2);
  EXPECT_EQ(ws.run("frobnicate"), 2);
  EXPECT_EQ(ws.run("synth --no-such-flag 1"), 2);
}

TEST(Binary, SeedIsRequired) {
  Workspace ws;
  EXPECT_EQ(ws.run(std::string(kSynthXor) + " --out-dir s"), 2);
  EXPECT_NE(ws.stderr_text().find("seed"), std::string::npos);
  EXPECT_FALSE(fs::exists(ws / "s"));
}

TEST(Binary, MissingInputExitsTwoWithoutOutputs) {
  Workspace ws;
  for (const char* cmd : {"debias", "inlp", "eval", "sweep", "probe"}) {
    EXPECT_EQ(ws.run(std::string(cmd) + " --seed 1 --data missing.embd --out-dir out"), 2) << cmd;
    EXPECT_FALSE(fs::exists(ws / "out")) << cmd;
  }
  EXPECT_EQ(ws.run("apply --stack missing.igbp --input missing.embd --out-dir out"), 2);
  EXPECT_EQ(ws.run("debias --seed 1 --out-dir out"), 2);  // no data path at all
  EXPECT_FALSE(fs::exists(ws / "out"));
}

TEST(Binary, UnknownConfigKeyExitsTwo) {
  Workspace ws;
  ws.write("bad.json", R"({"seed": 1, "trian": {}})");
  EXPECT_EQ(ws.run("synth --config bad.json"), 2);
  EXPECT_NE(ws.stderr_text().find("trian"), std::string::npos);
  EXPECT_EQ(ws.run("synth --seed 1 --set synth.colour=red"), 2);
}

TEST(Binary, XorEndToEnd) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 1 --out-dir s"), 0) << ws.stderr_text();
  ASSERT_EQ(ws.run("debias --config desk.json --seed 1 --data s/data.embd --arch mlp:12 --out-dir d "
                   "--set stop.use_floor_rule=false"),
            0)
      << ws.stderr_text();
  for (const char* f : {"stack.igbp", "clean.embd", "clean_train.embd", "clean_dev.embd", "clean_test.embd",
                        "report.txt", "report.csv"})
    EXPECT_TRUE(fs::exists(ws / "d" / f)) << f;
  const auto rows = csv_rows(ws.read("d/report.csv"));
  ASSERT_GE(rows.size(), 2u);
  const auto& last = rows.back();
  EXPECT_EQ(last.back(), "probe-at-chance");
  EXPECT_LE(std::stod(last[1]), std::stod(last[2]) + 0.02);
  EXPECT_NE(ws.read("stdout.txt").find("probe_acc"), std::string::npos);
  const auto stack = stack_from_bytes(ws.read("d/stack.igbp"));
  EXPECT_EQ(stack.probes.size(), rows.size() - 2);  // header and the unapplied chance probe
}

TEST(Binary, LinearArchitectureMatchesInlp) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthLinear) + " --seed 2 --out-dir s"), 0);
  const std::string common = "--config desk.json --seed 3 --data s/data.embd --set stop.use_floor_rule=false";
  ASSERT_EQ(ws.run("debias --arch linear --out-dir a " + common), 0) << ws.stderr_text();
  ASSERT_EQ(ws.run("inlp --out-dir b " + common), 0) << ws.stderr_text();
  const Dataset a = load_dataset(ws / "a/clean.embd"), b = load_dataset(ws / "b/clean.embd");
  ASSERT_EQ(a.x.rows(), b.x.rows());
  for (std::size_t i = 0; i < a.x.data().size(); ++i) ASSERT_NEAR(a.x.data()[i], b.x.data()[i], 1e-9);
  const auto ra = csv_rows(ws.read("a/report.csv")), rb = csv_rows(ws.read("b/report.csv"));
  ASSERT_EQ(ra.size(), rb.size());
  ASSERT_GE(ra.size(), 3u);  // at least one applied probe
  for (std::size_t i = 1; i < ra.size(); ++i) EXPECT_EQ(ra[i][1], rb[i][1]);
}

TEST(Binary, ApplyReproducesTheTrainingTransformBitForBit) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 4 --out-dir s"), 0);
  ASSERT_EQ(ws.run("debias --config desk.json --seed 4 --data s/data.embd --arch mlp:6 --out-dir d "
                   "--set stop.use_floor_rule=false"),
            0);
  ASSERT_GE(stack_from_bytes(ws.read("d/stack.igbp")).probes.size(), 1u);
  ASSERT_EQ(ws.run("apply --stack d/stack.igbp --input s/data.embd --out-dir ap"), 0) << ws.stderr_text();
  EXPECT_EQ(ws.read("ap/applied.embd"), ws.read("d/clean.embd"));
  const auto rep = metrics_csv(ws.read("ap/apply_report.csv"));
  EXPECT_TRUE(rep.count("reapplication_distance"));
  EXPECT_EQ(rep.at("rows"), 3000.0);
}

TEST(Binary, ApplyWithEmptyStackIsTheIdentity) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 5 --out-dir s"), 0);
  ProjectionStack empty;
  empty.input_dim = 6;
  io::write_file_atomic(ws / "empty.igbp", stack_to_bytes(empty));
  ASSERT_EQ(ws.run("apply --stack empty.igbp --input s/data.embd --output same.embd --out-dir ap"), 0);
  EXPECT_EQ(ws.read("same.embd"), ws.read("s/data.embd"));
  EXPECT_EQ(metrics_csv(ws.read("ap/apply_report.csv")).at("reapplication_distance"), 0.0);
}

TEST(Binary, ApplyRejectsCorruptStacksAndDimensionMismatch) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 6 --out-dir s"), 0);
  ASSERT_EQ(ws.run("debias --config desk.json --seed 6 --data s/data.embd --arch mlp:6 --out-dir d "
                   "--set stop.use_floor_rule=false"),
            0);
  std::string bytes = ws.read("d/stack.igbp");
  bytes[0] = 'X';
  ws.write("corrupt.igbp", bytes);
  EXPECT_EQ(ws.run("apply --stack corrupt.igbp --input s/data.embd --out-dir ap"), 2);
  EXPECT_NE(ws.stderr_text().find("magic"), std::string::npos);
  ASSERT_EQ(ws.run("synth --seed 6 --set synth.dim=5 --out-dir other"), 0);
  EXPECT_EQ(ws.run("apply --stack d/stack.igbp --input other/data.embd --out-dir ap"), 2);
  EXPECT_FALSE(fs::exists(ws / "ap"));
}

TEST(Binary, EvalReportsTheMetricBattery) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthLinear) + " --seed 7 --set synth.shift=8 --out-dir s"), 0);
  ASSERT_EQ(ws.run("eval --config desk.json --seed 7 --data s/data.embd --out-dir e"), 0) << ws.stderr_text();
  const auto m = metrics_csv(ws.read("e/metrics.csv"));
  for (const char* k : {"main_accuracy", "tpr_gap_rms", "leakage", "leakage_majority", "mdl_compression"})
    EXPECT_TRUE(m.count(k)) << k;
  EXPECT_GE(m.at("leakage"), 99.0);  // z sits 4 sigma either side of zero on one axis
  EXPECT_GT(m.at("mdl_compression"), 3.0);
  EXPECT_DOUBLE_EQ(m.at("mdl_uniform_bits"), 2000.0);  // N log2 2
  EXPECT_NE(ws.read("e/metrics.txt").find("main_accuracy"), std::string::npos);
  EXPECT_EQ(ws.run("eval --config desk.json --seed 7 --data s/data.embd --out-dir e2 "
                   "--set 'eval.metrics=[\"accuracy\",\"vibes\"]'"),
            2);
  EXPECT_FALSE(fs::exists(ws / "e2"));
}

TEST(Binary, EvalOnScrambledAttributeIsAtChance) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthLinear) + " --seed 8 --set synth.scramble_z=true --out-dir s"), 0);
  ASSERT_EQ(ws.run("eval --config desk.json --seed 8 --data s/data.embd --out-dir e "
                   "--set 'eval.metrics=[\"mdl\",\"leakage\"]'"),
            0)
      << ws.stderr_text();
  const auto m = metrics_csv(ws.read("e/metrics.csv"));
  EXPECT_GE(m.at("mdl_compression"), 0.9);
  EXPECT_LE(m.at("mdl_compression"), 1.1);
  EXPECT_LE(m.at("leakage"), m.at("leakage_majority") + 5.0);
}

TEST(Binary, EvalComparesAgainstABaseline) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 9 --out-dir s"), 0);
  ASSERT_EQ(ws.run("debias --config desk.json --seed 9 --data s/data.embd --arch mlp:12 --out-dir d "
                   "--set stop.use_floor_rule=false"),
            0);
  ASSERT_EQ(ws.run("eval --config desk.json --seed 9 --data d/clean.embd --out-dir e --set eval.baseline=s/data.embd "
                   "--set adversary.runs=3 --set 'eval.metrics=[\"leakage\"]'"),
            0)
      << ws.stderr_text();
  const auto m = metrics_csv(ws.read("e/metrics.csv"));
  EXPECT_GT(m.at("baseline_leakage"), m.at("leakage"));
  EXPECT_TRUE(m.count("leakage_sd"));
  EXPECT_TRUE(m.count("leakage_welch_t"));
}

TEST(Binary, WeatMatchesTheLibrary) {
  Workspace ws;
  ws.write("vec.txt",
           "doctor 0.9 0.1 0.3\nengineer 0.8 -0.2 0.1\npilot 0.7 0.3 -0.2\n"
           "nurse -0.6 0.2 0.4\nteacher -0.7 0.1 0.1\ndancer -0.5 -0.3 0.2\n"
           "he 1 0 0\nman 0.9 0.1 0\nshe -1 0 0.1\nwoman -0.9 0 0.2\n");
  ws.write("x.txt", "doctor\nengineer\npilot\n");
  ws.write("y.txt", "nurse\nteacher\ndancer\n");
  ws.write("a.txt", "he\nman\n");
  ws.write("b.txt", "she\nwoman\n");
  ASSERT_EQ(ws.run("weat --seed 1 --embeddings vec.txt --set weat.x=x.txt --set weat.y=y.txt --set weat.a=a.txt "
                   "--set weat.b=b.txt --out-dir w"),
            0)
      << ws.stderr_text();
  const auto m = metrics_csv(ws.read("w/weat.csv"));
  const auto emb = load_word_vectors(ws / "vec.txt");
  const auto ref = weat({"doctor", "engineer", "pilot"}, {"nurse", "teacher", "dancer"}, {"he", "man"},
                        {"she", "woman"}, emb);
  EXPECT_EQ(m.at("effect_size"), ref.effect_size);
  EXPECT_EQ(m.at("p_value"), ref.p_value);
  EXPECT_EQ(m.at("permutations"), 20.0);  // C(6, 3)
  EXPECT_EQ(m.at("exact"), 1.0);
  EXPECT_EQ(ws.run("weat --seed 1 --embeddings vec.txt --out-dir w2"), 2);  // word lists missing
}

TEST(Binary, ProbeCommandWritesAReadableProbe) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 10 --out-dir s"), 0);
  ASSERT_EQ(ws.run("probe --config desk.json --seed 10 --data s/data.embd --arch mlp:16 --out-dir p"), 0)
      << ws.stderr_text();
  std::istringstream is(ws.read("p/probe.bin"));
  const Probe probe = read_probe(is);
  EXPECT_EQ(probe.arch.name(), "mlp:16");
  const auto m = metrics_csv(ws.read("p/probe_report.csv"));
  EXPECT_GE(m.at("test_accuracy"), 0.95);
  const Dataset ds = load_dataset(ws / "s/data.embd");
  const auto te = ds.view(Split::kTest);
  EXPECT_EQ(accuracy(probe, te.x, te.z), m.at("test_accuracy"));
}

TEST(Binary, TextOutputFormat) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 11 --set data.output_format=text --out-dir s"), 0);
  const Dataset ds = load_dataset(ws / "s/data.csv");
  EXPECT_EQ(ds.size(), 3000u);
  EXPECT_EQ(ds.indices(Split::kDev).size(), 500u);
}

TEST(Binary, DatasetsWithoutSplitsAreSplitBySeed) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthLinear) + " --seed 12 --out-dir s"), 0);
  Dataset ds = load_dataset(ws / "s/data.embd");
  ds.split.clear();
  save_dataset(ws / "nosplit.embd", ds);
  ASSERT_EQ(ws.run("probe --config desk.json --seed 12 --data nosplit.embd --arch linear --out-dir p "
                   "--set 'data.split=[0.6,0.2,0.2]'"),
            0)
      << ws.stderr_text();
  const auto m = metrics_csv(ws.read("p/probe_report.csv"));
  EXPECT_TRUE(m.count("dev_accuracy"));
  EXPECT_TRUE(m.count("test_accuracy"));
}

TEST(Binary, SweepIterationCurveOnCoupledData) {
  // Analogue of a dialect/sentiment setup: the main label mostly copies the
  // attribute and carries only a weak signal of its own, so the main-task head
  // leans on the attribute and has a large TPR gap to lose.
  Workspace ws;
  ASSERT_EQ(ws.run("synth --seed 2 --set synth.kind=linear-gaussian --set synth.dim=10 --set synth.n_train=3000 "
                   "--set synth.n_dev=1000 --set synth.n_test=1000 --set synth.yz_coupling=0.8 "
                   "--set synth.y_shift=0.5 --out-dir s"),
            0);
  ASSERT_EQ(ws.run("sweep --config desk.json --seed 1 --data s/data.embd --out-dir w --set stop.use_floor_rule=false "
                   "--set 'sweep.archs=[\"mlp:10\"]' --set 'sweep.iterations=[1,5,20]'"),
            0)
      << ws.stderr_text();
  const auto rows = csv_rows(ws.read("w/sweep.csv"));
  ASSERT_EQ(rows[0], (std::vector<std::string>{"arch", "seed", "iteration", "accuracy", "gap", "leakage"}));
  ASSERT_EQ(rows.size(), 1u + 5 * 3);  // five seeds by default
  std::map<std::size_t, double> gap;
  for (std::size_t i = 1; i < rows.size(); ++i) gap[std::stoul(rows[i][2])] += std::stod(rows[i][4]) / 5.0;
  EXPECT_LT(gap[20], gap[5]);
  EXPECT_LT(gap[5], gap[1]);
  EXPECT_NE(ws.read("w/sweep.txt").find("mlp:10"), std::string::npos);
}

TEST(Binary, SweepArchitecturesOnXor) {
  // With a non-linear main-task head the attribute's XOR encoding feeds the
  // TPR gap, which only non-linear probes can remove.
  Workspace ws;
  ASSERT_EQ(ws.run("synth --seed 2 --set synth.kind=xor --set synth.dim=6 --set synth.n_train=3000 "
                   "--set synth.n_dev=1000 --set synth.n_test=1000 --set synth.yz_coupling=0.6 "
                   "--set synth.xor_margin=0.3 --out-dir s"),
            0);
  ASSERT_EQ(ws.run("sweep --config desk.json --seed 1 --data s/data.embd --out-dir w --set stop.use_floor_rule=false "
                   "--set main_task.head=mlp:16 --set 'sweep.archs=[\"linear\",\"mlp:6\"]' "
                   "--set 'sweep.iterations=[20]' --set sweep.seeds=3"),
            0)
      << ws.stderr_text();
  std::map<std::string, double> gap;
  for (const auto& r : csv_rows(ws.read("w/sweep.csv")))
    if (r[0] != "arch") gap[r[0]] += std::stod(r[4]) / 3.0;
  EXPECT_LT(gap["mlp:6"], gap["linear"]);
}

TEST(Binary, EmptySweepGridExitsTwo) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 13 --out-dir s"), 0);
  EXPECT_EQ(ws.run("sweep --seed 1 --data s/data.embd --out-dir w --set 'sweep.archs=[]'"), 2);
  EXPECT_EQ(ws.run("sweep --seed 1 --data s/data.embd --out-dir w --set 'sweep.iterations=[]'"), 2);
  EXPECT_EQ(ws.run("sweep --seed 1 --data s/data.embd --out-dir w --set sweep.seeds=0"), 2);
  EXPECT_FALSE(fs::exists(ws / "w"));
}

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = io::read_file(e.path());
  return out;
}

TEST(Binary, RerunsAreByteIdentical) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 14 --out-dir s1"), 0);
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 14 --out-dir s2"), 0);
  EXPECT_EQ(directory_bytes(ws / "s1"), directory_bytes(ws / "s2"));
  const std::string debias = "debias --config desk.json --seed 14 --data s1/data.embd --arch mlp:6 "
                             "--set stop.use_floor_rule=false";
  ASSERT_EQ(ws.run(debias + " --out-dir d1"), 0);
  ASSERT_EQ(ws.run(debias + " --out-dir d2 --threads 4"), 0);
  EXPECT_EQ(directory_bytes(ws / "d1"), directory_bytes(ws / "d2"));
  const std::string eval = "eval --config desk.json --seed 14 --data d1/clean.embd";
  ASSERT_EQ(ws.run(eval + " --out-dir e1"), 0);
  ASSERT_EQ(ws.run(eval + " --out-dir e2 --threads 3"), 0);
  EXPECT_EQ(directory_bytes(ws / "e1"), directory_bytes(ws / "e2"));
}

TEST(Binary, EnvironmentOverridesMatchFlags) {
  Workspace ws;
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 15 --out-dir a"), 0);
  ASSERT_EQ(ws.run(kSynthXor, "IGBP_SEED=15 IGBP_OUT_DIR=b"), 0) << ws.stderr_text();
  EXPECT_EQ(ws.read("a/data.embd"), ws.read("b/data.embd"));
  // Flags beat the environment.
  ASSERT_EQ(ws.run(std::string(kSynthXor) + " --seed 16 --out-dir c", "IGBP_SEED=15"), 0);
  EXPECT_NE(ws.read("a/data.embd"), ws.read("c/data.embd"));
  EXPECT_EQ(ws.run(kSynthXor, "IGBP_SEED=abc IGBP_OUT_DIR=d"), 2);
}

}  // namespace
}  // namespace igbp
