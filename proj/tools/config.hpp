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

// Run configuration for the command-line tool. A configuration is a nested
// JSON object whose shape is fixed by `default_config()`. Layers are applied
// in increasing precedence: defaults, the --config file, IGBP_* environment
// variables, then command-line flags. Unknown keys and mistyped values are
// rejected in every layer.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "igbp/igbp.hpp"
#include "json.hpp"

namespace igbp::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kEnvPrefix = "IGBP_";

inline json default_config() {
  return json::parse(R"({
    "seed": null,
    "threads": 1,
    "out_dir": "igbp-out",
    "data": {"path": "", "format": "auto", "split": [0.8, 0.1, 0.1], "output_format": "binary"},
    "probe": {"arch": "mlp:1x"},
    "train": {"lr": 0.0002, "batch_size": 256, "epochs": 20, "patience": 3, "weight_decay": 0.0,
              "dev_fraction": 0.1, "select_by": "accuracy"},
    "stop": {"probe_acc_margin": 0.02, "main_acc_floor_ratio": 0.98, "max_iterations": 20,
             "use_probe_rule": true, "use_floor_rule": true},
    "projection": {"eps_grad": 1e-10},
    "main_task": {"head": "logistic", "steps": 300, "lr": 0.05, "l2": 0.0001},
    "adversary": {"arch": "mlp:512,512", "runs": 1,
                  "train": {"lr": 0.0002, "batch_size": 256, "epochs": 20, "patience": 3, "weight_decay": 0.0,
                            "dev_fraction": 0.1, "select_by": "accuracy"}},
    "eval": {"metrics": ["accuracy", "gap", "leakage", "mdl"], "mdl_arch": "linear",
             "mdl_fractions": [2.0, 3.0, 4.4, 6.5, 9.5, 14.0, 21.0, 31.0, 45.7, 67.6, 100.0], "baseline": ""},
    "synth": {"kind": "xor", "dim": 20, "n_train": 8000, "n_dev": 1000, "n_test": 1000, "balance": 0.5,
              "noise": 1.0, "shift": 4.0, "y_shift": 3.0, "xor_margin": 0.0, "num_classes": 2,
              "yz_coupling": 0.0, "scramble_z": false, "seed": null},
    "apply": {"stack": "", "input": "", "output": ""},
    "weat": {"embeddings": "", "stack": "", "x": "", "y": "", "a": "", "b": "",
             "exact_threshold": 1000000, "mc_draws": 10000},
    "sweep": {"archs": ["linear", "mlp:1x"], "iterations": [0, 1, 2, 5, 10, 20], "seeds": 5}
  })");
}

namespace detail {

inline bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline std::string type_name(const json& schema) {
  if (schema.is_null()) return "non-negative integer";
  if (schema.is_boolean()) return "boolean";
  if (schema.is_number_float()) return "number";
  if (schema.is_number()) return "non-negative integer";
  if (schema.is_string()) return "string";
  if (schema.is_array()) return "list";
  return "object";
}

inline bool matches(const json& schema, const json& v) {
  if (schema.is_null()) return v.is_null() || is_count(v);
  if (schema.is_boolean()) return v.is_boolean();
  if (schema.is_number_float()) return v.is_number();
  if (schema.is_number()) return is_count(v);
  if (schema.is_string()) return v.is_string();
  if (schema.is_array()) {
    if (!v.is_array()) return false;
    if (schema.empty()) return true;
    for (const auto& e : v)
      if (!matches(schema.front(), e)) return false;
    return true;
  }
  return v.is_object();
}

inline void check_against(const json& schema, const json& v, const std::string& path) {
  if (schema.is_object()) {
    if (!v.is_object()) throw ConfigError("config key '" + path + "' must be an object");
    for (const auto& [key, value] : v.items()) {
      const std::string sub = path.empty() ? key : path + "." + key;
      if (!schema.contains(key)) throw ConfigError("unknown config key '" + sub + "'");
      check_against(schema.at(key), value, sub);
    }
    return;
  }
  if (!matches(schema, v)) throw ConfigError("config key '" + path + "' must be a " + type_name(schema));
}

inline void deep_merge(json& base, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) deep_merge(base[key], value);
    else base[key] = value;
  }
}

inline void leaf_paths(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string p = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) leaf_paths(value, p, out);
    else out.push_back(p);
  }
}

inline json::json_pointer pointer_of(const std::string& dotted) {
  std::string p;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot - start);
    if (part.empty()) throw ConfigError("malformed config key '" + dotted + "'");
    p += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(p);
}

}  // namespace detail

// "train.batch_size" -> "IGBP_TRAIN_BATCH_SIZE".
inline std::string env_name(const std::string& dotted) {
  std::string out = kEnvPrefix;
  for (char c : dotted) out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  detail::leaf_paths(default_config(), "", out);
  return out;
}

// A flag or environment value: JSON when it parses as JSON, otherwise the raw
// text as a string (so --set data.path=foo.csv needs no quoting).
inline json parse_override_value(const std::string& text) {
  json v = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) return json(text);
  return v;
}

class ConfigBuilder {
 public:
  ConfigBuilder() : schema_(default_config()), cfg_(schema_) {}

  void merge_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InputError("config file not found: " + path.string());
    json j = json::parse(io::read_file(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
    merge(j);
  }

  void merge(const json& patch) {
    detail::check_against(schema_, patch, "");
    detail::deep_merge(cfg_, patch);
  }

  // Sets one dotted key; the key must exist in the schema.
  void set(const std::string& dotted, const json& value) {
    const auto ptr = detail::pointer_of(dotted);
    if (!schema_.contains(ptr) || schema_.at(ptr).is_object())
      throw ConfigError("unknown config key '" + dotted + "'");
    if (!detail::matches(schema_.at(ptr), value))
      throw ConfigError("config key '" + dotted + "' must be a " + detail::type_name(schema_.at(ptr)));
    cfg_[ptr] = value;
  }

  // Sets a key from flag or environment text. String keys take the text
  // verbatim; other keys parse it as JSON.
  void set_text(const std::string& dotted, const std::string& text) {
    const auto ptr = detail::pointer_of(dotted);
    const bool is_string = schema_.contains(ptr) && schema_.at(ptr).is_string();
    set(dotted, is_string ? json(text) : parse_override_value(text));
  }

  // "key=value" as given to --set.
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    set_text(assignment.substr(0, eq), assignment.substr(eq + 1));
  }

  // Applies every IGBP_<KEY> variable that names a schema key. `getenv` is
  // injectable for tests.
  void merge_env(const std::function<const char*(const char*)>& getenv = [](const char* n) { return std::getenv(n); }) {
    for (const auto& key : config_keys()) {
      const std::string name = env_name(key);
      if (const char* v = getenv(name.c_str()); v != nullptr) {
        try {
          set_text(key, v);
        } catch (const ConfigError& e) {
          throw ConfigError(std::string(e.what()) + " (from environment variable " + name + ")");
        }
      }
    }
  }

  const json& get() const { return cfg_; }

 private:
  json schema_;
  json cfg_;
};

// ---------------------------------------------------------------------------
// Typed views of the configuration

inline std::uint64_t required_seed(const json& cfg) {
  if (cfg.at("seed").is_null()) throw ConfigError("a seed is required (--seed, IGBP_SEED or \"seed\" in the config)");
  return cfg.at("seed").get<std::uint64_t>();
}

inline TrainConfig train_config(const json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.dev_fraction = j.at("dev_fraction").get<double>();
  const auto sel = j.at("select_by").get<std::string>();
  if (sel == "accuracy") c.select_by = SelectBy::kAccuracy;
  else if (sel == "loss") c.select_by = SelectBy::kLoss;
  else throw ConfigError("train.select_by must be 'accuracy' or 'loss'");
  c.validate();
  return c;
}

inline StoppingCriteria stop_config(const json& j) {
  StoppingCriteria s;
  s.probe_acc_margin = j.at("probe_acc_margin").get<double>();
  s.main_acc_floor_ratio = j.at("main_acc_floor_ratio").get<double>();
  s.max_iterations = j.at("max_iterations").get<std::size_t>();
  s.use_probe_rule = j.at("use_probe_rule").get<bool>();
  s.use_floor_rule = j.at("use_floor_rule").get<bool>();
  s.validate();
  return s;
}

inline LogisticConfig main_task_config(const json& j) {
  LogisticConfig c;
  c.steps = j.at("steps").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.l2 = j.at("l2").get<double>();
  if (c.steps < 1 || !(c.lr > 0.0) || !(c.l2 >= 0.0)) throw ConfigError("main_task: steps >= 1, lr > 0, l2 >= 0");
  return c;
}

inline SynthSpec synth_spec(const json& j, std::uint64_t global_seed) {
  SynthSpec s;
  s.kind = parse_synth_kind(j.at("kind").get<std::string>());
  s.dim = j.at("dim").get<std::size_t>();
  s.n_train = j.at("n_train").get<std::size_t>();
  s.n_dev = j.at("n_dev").get<std::size_t>();
  s.n_test = j.at("n_test").get<std::size_t>();
  s.balance = j.at("balance").get<double>();
  s.noise = j.at("noise").get<double>();
  s.shift = j.at("shift").get<double>();
  s.y_shift = j.at("y_shift").get<double>();
  s.xor_margin = j.at("xor_margin").get<double>();
  s.num_classes = j.at("num_classes").get<std::size_t>();
  s.yz_coupling = j.at("yz_coupling").get<double>();
  s.scramble_z = j.at("scramble_z").get<bool>();
  s.seed = j.at("seed").is_null() ? global_seed : j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

inline std::array<double, 3> split_ratios(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError("data.split must list three ratios (train, dev, test)");
  return {v[0], v[1], v[2]};
}

}  // namespace igbp::cli
