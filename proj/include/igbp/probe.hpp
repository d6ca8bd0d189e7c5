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

// Attribute probes: linear or ReLU-MLP scorers producing one scalar logit.
//
// A probe with hidden widths h_1..h_L computes
//
//   a_0 = x,  a_l = ReLU(a_{l-1} W_l + b_l),  f(x) = a_L . theta + c
//
// with W_l stored as (in x out), i.e. the row-vector convention z = x^T W.
// Inside one activation region the network is the affine map
// f(x) = x . theta_r + const with theta_r = W_1 D_1 ... W_L D_L theta, which is
// exactly what input_gradient returns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "igbp/error.hpp"
#include "igbp/io.hpp"
#include "igbp/numerics.hpp"

namespace igbp {

enum class ProbeMode : std::uint32_t { kClassifier = 0, kRegressor = 1 };

struct ProbeArchitecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;  // empty => linear probe
  ProbeMode mode = ProbeMode::kClassifier;
  bool bias = true;

  bool is_linear() const { return hidden.empty(); }

  // Linear probes default to no intercept so the projection is the pure
  // null-space projection x - (x.theta / theta.theta) theta.
  static ProbeArchitecture linear(std::size_t dim, ProbeMode mode = ProbeMode::kClassifier) {
    return {dim, {}, mode, false};
  }
  static ProbeArchitecture mlp(std::size_t dim, std::vector<std::size_t> widths,
                               ProbeMode mode = ProbeMode::kClassifier) {
    return {dim, std::move(widths), mode, true};
  }

  void validate() const {
    if (input_dim < 1) throw InputError("probe input_dim must be >= 1");
    for (auto w : hidden)
      if (w < 1) throw InputError("probe hidden widths must be >= 1");
  }

  // "linear" or "mlp:20,20"; bias is reported separately.
  std::string name() const {
    if (hidden.empty()) return "linear";
    std::string s = "mlp:";
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(hidden[i]);
    }
    return s;
  }

  friend bool operator==(const ProbeArchitecture&, const ProbeArchitecture&) = default;
};

// Parses "linear", "mlp:W1,W2,...", or "mlp:Nx,2x" where a trailing 'x' scales
// the input dimension (so "mlp:1x" is one hidden layer as wide as the input).
inline ProbeArchitecture parse_architecture(const std::string& spec, std::size_t input_dim,
                                            ProbeMode mode = ProbeMode::kClassifier) {
  if (spec == "linear") return ProbeArchitecture::linear(input_dim, mode);
  if (spec.rfind("mlp:", 0) != 0) throw ConfigError("unknown probe architecture '" + spec + "'");
  std::vector<std::size_t> widths;
  std::stringstream ss(spec.substr(4));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) throw ConfigError("empty width in architecture '" + spec + "'");
    try {
      std::size_t used = 0;
      if (tok.back() == 'x') {
        const double k = std::stod(tok.substr(0, tok.size() - 1), &used);
        if (used != tok.size() - 1 || k <= 0) throw ConfigError("bad width");
        widths.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(k * input_dim))));
      } else {
        const long w = std::stol(tok, &used);
        if (used != tok.size() || w < 1) throw ConfigError("bad width");
        widths.push_back(static_cast<std::size_t>(w));
      }
    } catch (const std::exception&) {
      throw ConfigError("bad width '" + tok + "' in architecture '" + spec + "'");
    }
  }
  if (widths.empty()) throw ConfigError("architecture '" + spec + "' has no layers");
  return ProbeArchitecture::mlp(input_dim, std::move(widths), mode);
}

// Offsets of each tensor inside the flat parameter vector.
struct ProbeLayout {
  struct Layer {
    std::size_t in, out, w_offset, b_offset;  // b_offset unused without bias
  };
  std::vector<Layer> layers;
  std::size_t theta_offset = 0;
  std::size_t theta_size = 0;
  std::size_t c_offset = 0;
  std::size_t total = 0;

  explicit ProbeLayout(const ProbeArchitecture& arch) {
    std::size_t in = arch.input_dim, off = 0;
    for (auto out : arch.hidden) {
      Layer l{in, out, off, 0};
      off += in * out;
      l.b_offset = off;
      if (arch.bias) off += out;
      layers.push_back(l);
      in = out;
    }
    theta_offset = off;
    theta_size = in;
    off += in;
    c_offset = off;
    if (arch.bias) off += 1;
    total = off;
  }
};

struct Probe {
  ProbeArchitecture arch;
  std::vector<double> params;

  Probe() = default;
  explicit Probe(ProbeArchitecture a) : arch(std::move(a)), params(ProbeLayout(arch).total, 0.0) {
    arch.validate();
  }

  ProbeLayout layout() const { return ProbeLayout(arch); }

  std::span<const double> theta() const {
    const ProbeLayout l(arch);
    return {params.data() + l.theta_offset, l.theta_size};
  }
  std::span<double> theta() {
    const ProbeLayout l(arch);
    return {params.data() + l.theta_offset, l.theta_size};
  }
  double output_bias() const { return arch.bias ? params[ProbeLayout(arch).c_offset] : 0.0; }

  friend bool operator==(const Probe&, const Probe&) = default;
};

// Hidden layers: Kaiming-uniform on fan-in, biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
// The output layer starts at zero, so an untrained probe scores every input as
// exactly ambiguous (logit 0).
inline Probe init_probe(const ProbeArchitecture& arch, Rng& rng) {
  Probe p(arch);
  const ProbeLayout lay(arch);
  for (const auto& l : lay.layers) {
    const double wb = std::sqrt(6.0 / static_cast<double>(l.in));
    for (std::size_t i = 0; i < l.in * l.out; ++i) p.params[l.w_offset + i] = rng.uniform(-wb, wb);
    if (arch.bias) {
      const double bb = 1.0 / std::sqrt(static_cast<double>(l.in));
      for (std::size_t i = 0; i < l.out; ++i) p.params[l.b_offset + i] = rng.uniform(-bb, bb);
    }
  }
  return p;
}

namespace detail {
inline void check_input(const Probe& p, std::span<const double> x) {
  if (x.size() != p.arch.input_dim) {
    throw ShapeError("probe expects dimension " + std::to_string(p.arch.input_dim) + ", got " +
                     std::to_string(x.size()));
  }
  for (double v : x)
    if (!std::isfinite(v)) throw InputError("non-finite probe input");
}
}  // namespace detail

// Logit, gradient and activation pattern at one point, from a single pass.
struct LocalModel {
  double logit = 0.0;
  std::vector<double> gradient;     // theta_r, the local linear weights
  std::vector<std::uint8_t> pattern;  // concatenated ReLU on/off bits of all hidden layers
};

inline LocalModel local_model(const Probe& p, std::span<const double> x, bool want_gradient = true) {
  detail::check_input(p, x);
  const ProbeLayout lay(p.arch);
  const double* P = p.params.data();
  LocalModel out;
  std::vector<double> a(x.begin(), x.end()), z;
  std::vector<std::vector<std::uint8_t>> masks;
  masks.reserve(lay.layers.size());
  for (const auto& l : lay.layers) {
    z.assign(l.out, 0.0);
    if (p.arch.bias) std::copy(P + l.b_offset, P + l.b_offset + l.out, z.begin());
    for (std::size_t i = 0; i < l.in; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      const double* wi = P + l.w_offset + i * l.out;
      for (std::size_t j = 0; j < l.out; ++j) z[j] += ai * wi[j];
    }
    std::vector<std::uint8_t> m(l.out);
    // ReLU'(0) := 0.
    for (std::size_t j = 0; j < l.out; ++j) {
      m[j] = z[j] > 0.0;
      z[j] = m[j] ? z[j] : 0.0;
    }
    out.pattern.insert(out.pattern.end(), m.begin(), m.end());
    masks.push_back(std::move(m));
    a.swap(z);
  }
  out.logit = dot(a, {P + lay.theta_offset, lay.theta_size}) + p.output_bias();
  if (!want_gradient) return out;

  std::vector<double> g(P + lay.theta_offset, P + lay.theta_offset + lay.theta_size);
  for (std::size_t li = lay.layers.size(); li-- > 0;) {
    const auto& l = lay.layers[li];
    for (std::size_t j = 0; j < l.out; ++j)
      if (!masks[li][j]) g[j] = 0.0;
    std::vector<double> gin(l.in, 0.0);
    for (std::size_t i = 0; i < l.in; ++i) {
      const double* wi = P + l.w_offset + i * l.out;
      double s = 0.0;
      for (std::size_t j = 0; j < l.out; ++j) s += wi[j] * g[j];
      gin[i] = s;
    }
    g.swap(gin);
  }
  out.gradient = std::move(g);
  return out;
}

inline double forward(const Probe& p, std::span<const double> x) {
  return local_model(p, x, false).logit;
}

inline std::vector<double> input_gradient(const Probe& p, std::span<const double> x) {
  return local_model(p, x, true).gradient;
}

inline std::vector<std::uint8_t> activation_pattern(const Probe& p, std::span<const double> x) {
  return local_model(p, x, false).pattern;
}

// P(z = 1 | x) = sigmoid(f(x)).
inline double predict_proba(const Probe& p, std::span<const double> x) {
  if (p.arch.mode != ProbeMode::kClassifier) throw ModeError("predict_proba on a regressor probe");
  return sigmoid(forward(p, x));
}

// ---------------------------------------------------------------------------
// Batched evaluation and training

namespace detail {

// Activations of one minibatch, kept for backprop.
struct BatchTrace {
  std::vector<Matrix> pre;   // Z_l, before ReLU
  std::vector<Matrix> post;  // a_l, a_0 = input
  std::vector<double> logits;
};

inline BatchTrace forward_batch_trace(const Probe& p, const Matrix& x) {
  const ProbeLayout lay(p.arch);
  const double* P = p.params.data();
  BatchTrace t;
  t.post.push_back(x);
  for (const auto& l : lay.layers) {
    const Matrix& a = t.post.back();
    Matrix z(a.rows(), l.out);
    kernel::gemm(a.data(), {P + l.w_offset, l.in * l.out}, z.data(), a.rows(), l.in, l.out);
    Matrix h(a.rows(), l.out);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto zr = z.row(r);
      auto hr = h.row(r);
      for (std::size_t j = 0; j < l.out; ++j) {
        if (p.arch.bias) zr[j] += P[l.b_offset + j];
        hr[j] = zr[j] > 0.0 ? zr[j] : 0.0;
      }
    }
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(h));
  }
  const Matrix& a = t.post.back();
  std::span<const double> theta{P + lay.theta_offset, lay.theta_size};
  const double c = p.output_bias();
  t.logits.resize(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) t.logits[r] = dot(a.row(r), theta) + c;
  return t;
}

// Accumulates d(loss)/d(params) given d(loss)/d(logit) for every batch row.
inline void backward_batch(const Probe& p, const BatchTrace& t, std::span<const double> dlogit,
                           std::span<double> grad) {
  const ProbeLayout lay(p.arch);
  const double* P = p.params.data();
  std::fill(grad.begin(), grad.end(), 0.0);
  const Matrix& aL = t.post.back();
  const std::size_t B = aL.rows();
  kernel::gemm_tn(aL.data(), dlogit, grad.subspan(lay.theta_offset, lay.theta_size), B,
                  lay.theta_size, 1);
  if (p.arch.bias) {
    double s = 0.0;
    for (double d : dlogit) s += d;
    grad[lay.c_offset] = s;
  }
  if (lay.layers.empty()) return;

  Matrix da(B, lay.theta_size);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t j = 0; j < lay.theta_size; ++j) da(r, j) = dlogit[r] * P[lay.theta_offset + j];

  for (std::size_t li = lay.layers.size(); li-- > 0;) {
    const auto& l = lay.layers[li];
    const Matrix& z = t.pre[li];
    Matrix& dz = da;  // reuse storage: mask in place
    for (std::size_t r = 0; r < B; ++r) {
      auto zr = z.row(r);
      auto dr = dz.row(r);
      for (std::size_t j = 0; j < l.out; ++j)
        if (!(zr[j] > 0.0)) dr[j] = 0.0;
    }
    const Matrix& ain = t.post[li];
    kernel::gemm_tn(ain.data(), dz.data(), grad.subspan(l.w_offset, l.in * l.out), B, l.in, l.out);
    if (p.arch.bias) {
      for (std::size_t r = 0; r < B; ++r) {
        auto dr = dz.row(r);
        for (std::size_t j = 0; j < l.out; ++j) grad[l.b_offset + j] += dr[j];
      }
    }
    if (li > 0) {
      // W^T, (out x in)
      std::vector<double> wt(l.out * l.in);
      for (std::size_t i = 0; i < l.in; ++i)
        for (std::size_t j = 0; j < l.out; ++j) wt[j * l.in + i] = P[l.w_offset + i * l.out + j];
      Matrix next(B, l.in);
      kernel::gemm(dz.data(), wt, next.data(), B, l.out, l.in);
      da = std::move(next);
    }
  }
}

}  // namespace detail

inline std::vector<double> forward_batch(const Probe& p, const Matrix& x) {
  if (x.cols() != p.arch.input_dim) throw ShapeError("forward_batch: dimension mismatch");
  return detail::forward_batch_trace(p, x).logits;
}

// Fraction of rows whose thresholded logit (f > 0 => 1) matches the 0/1 label.
inline double accuracy(const Probe& p, const Matrix& x, std::span<const double> labels) {
  if (x.rows() != labels.size()) throw ShapeError("accuracy: label count mismatch");
  if (x.rows() == 0) return 0.0;
  const auto logits = forward_batch(p, x);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) hit += (logits[i] > 0.0) == (labels[i] > 0.5);
  return static_cast<double>(hit) / static_cast<double>(logits.size());
}

// Mean cross-entropy in nats of 0/1 labels under sigmoid(logit).
inline double mean_cross_entropy(std::span<const double> logits, std::span<const double> labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    s += labels[i] > 0.5 ? softplus(-logits[i]) : softplus(logits[i]);
  return logits.empty() ? 0.0 : s / static_cast<double>(logits.size());
}

enum class SelectBy { kAccuracy, kLoss };

struct TrainConfig {
  double lr = 2e-4;
  std::size_t batch_size = 256;
  std::size_t epochs = 20;
  std::size_t patience = 3;
  double weight_decay = 0.0;
  double dev_fraction = 0.1;
  // Checkpoint criterion on the internal dev split. kLoss also considers the
  // untrained initialization as a candidate.
  SelectBy select_by = SelectBy::kAccuracy;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw ConfigError("train.dev_fraction must be in (0,1)");
  }
};

struct TrainResult {
  Probe probe;
  double best_dev_score = 0.0;  // accuracy, or -loss when selecting by loss / regressing
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

inline void check_binary_labels(std::span<const double> z, std::size_t min_per_class = 2) {
  std::size_t ones = 0;
  for (double v : z) {
    if (v != 0.0 && v != 1.0) throw InputError("classifier labels must be 0/1");
    ones += v == 1.0;
  }
  const std::size_t zeros = z.size() - ones;
  if (ones < min_per_class || zeros < min_per_class) {
    throw DegenerateDataError("need at least " + std::to_string(min_per_class) +
                              " samples of each class (got " + std::to_string(zeros) + "/" +
                              std::to_string(ones) + ")");
  }
}

// Minibatch AdamW on cross-entropy (classifier) or squared error (regressor),
// with a deterministic 90/10 train/dev split drawn from `rng` and early stopping
// on the dev score. Returns the best checkpoint.
inline TrainResult train_probe_detailed(const Matrix& x, std::span<const double> target,
                                        const ProbeArchitecture& arch, const TrainConfig& cfg,
                                        Rng& rng) {
  arch.validate();
  cfg.validate();
  if (x.cols() != arch.input_dim) throw ShapeError("train_probe: data dimension mismatch");
  if (x.rows() != target.size()) throw ShapeError("train_probe: target count mismatch");
  if (!x.all_finite()) throw InputError("train_probe: non-finite input");
  const bool classifier = arch.mode == ProbeMode::kClassifier;
  if (classifier) {
    check_binary_labels(target);
  } else if (x.rows() < 4) {
    throw DegenerateDataError("regressor needs at least 4 samples");
  }

  const std::size_t n = x.rows();
  auto order = rng.permutation(n);
  std::size_t n_dev = static_cast<std::size_t>(std::floor(cfg.dev_fraction * static_cast<double>(n)));
  n_dev = std::clamp<std::size_t>(n_dev, 1, n - 1);
  std::vector<std::size_t> dev_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_dev), order.end());
  const Matrix x_dev = take_rows(x, dev_idx);
  std::vector<double> t_dev(n_dev);
  for (std::size_t i = 0; i < n_dev; ++i) t_dev[i] = target[dev_idx[i]];

  TrainResult res;
  res.probe = init_probe(arch, rng);
  Probe& p = res.probe;

  const bool by_loss = !classifier || cfg.select_by == SelectBy::kLoss;
  auto dev_score = [&](const Probe& q) {
    const auto logits = forward_batch(q, x_dev);
    if (!classifier) {
      double s = 0.0;
      for (std::size_t i = 0; i < logits.size(); ++i) s += 0.5 * (logits[i] - t_dev[i]) * (logits[i] - t_dev[i]);
      return -s / static_cast<double>(logits.size());
    }
    if (by_loss) return -mean_cross_entropy(logits, t_dev);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) hit += (logits[i] > 0.0) == (t_dev[i] > 0.5);
    return static_cast<double>(hit) / static_cast<double>(logits.size());
  };

  // Accuracy ties (common once a separable problem is solved) go to the lower
  // dev loss, so training keeps improving the margin instead of stopping.
  auto dev_loss = [&](const Probe& q) { return mean_cross_entropy(forward_batch(q, x_dev), t_dev); };
  const bool tie_break = classifier && !by_loss;
  Probe best = p;
  double best_score = -std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();
  if (by_loss) best_score = dev_score(p);
  std::size_t since_best = 0;

  AdamWState opt(p.params.size(), AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  std::vector<double> grad(p.params.size());
  std::size_t batch_counter = 0;
  const std::size_t B = cfg.batch_size;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(train_idx);
    for (std::size_t start = 0; start < train_idx.size(); start += B, ++batch_counter) {
      const std::size_t end = std::min(train_idx.size(), start + B);
      std::span<const std::size_t> bidx(train_idx.data() + start, end - start);
      const Matrix xb = take_rows(x, bidx);
      const auto trace = detail::forward_batch_trace(p, xb);
      std::vector<double> dlogit(bidx.size());
      double loss = 0.0;
      const double inv = 1.0 / static_cast<double>(bidx.size());
      for (std::size_t i = 0; i < bidx.size(); ++i) {
        const double f = trace.logits[i], t = target[bidx[i]];
        if (classifier) {
          loss += t > 0.5 ? softplus(-f) : softplus(f);
          dlogit[i] = (sigmoid(f) - t) * inv;
        } else {
          loss += 0.5 * (f - t) * (f - t);
          dlogit[i] = (f - t) * inv;
        }
      }
      if (!std::isfinite(loss)) throw TrainingError("non-finite training loss", batch_counter);
      detail::backward_batch(p, trace, dlogit, grad);
      adamw_step(p.params, grad, opt, batch_counter);
    }
    res.epochs_run = epoch;
    const double s = dev_score(p);
    if (!std::isfinite(s)) throw TrainingError("non-finite dev score after epoch " + std::to_string(epoch));
    const double l = tie_break ? dev_loss(p) : 0.0;
    if (s > best_score || (tie_break && s == best_score && l < best_loss)) {
      best_score = s;
      best_loss = l;
      best = p;
      res.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience && cfg.patience > 0) {
      break;
    }
  }
  res.probe = std::move(best);
  res.best_dev_score = best_score;
  return res;
}

inline Probe train_probe(const Matrix& x, std::span<const double> target,
                         const ProbeArchitecture& arch, const TrainConfig& cfg, Rng& rng) {
  return train_probe_detailed(x, target, arch, cfg, rng).probe;
}

// ---------------------------------------------------------------------------
// Serialization: "IGBP" | u32 version | u32 mode | u8 bias | u64 input_dim |
// u64 n_hidden | u64 widths... | u64 n_params | f64 params... (little-endian)

inline constexpr char kProbeMagic[4] = {'I', 'G', 'B', 'P'};
inline constexpr std::uint32_t kProbeFormatVersion = 1;

inline void write_probe(std::ostream& os, const Probe& p) {
  os.write(kProbeMagic, 4);
  io::put_u32(os, kProbeFormatVersion);
  io::put_u32(os, static_cast<std::uint32_t>(p.arch.mode));
  io::put_u8(os, p.arch.bias ? 1 : 0);
  io::put_u64(os, p.arch.input_dim);
  io::put_u64(os, p.arch.hidden.size());
  for (auto w : p.arch.hidden) io::put_u64(os, w);
  io::put_u64(os, p.params.size());
  for (double v : p.params) io::put_f64(os, v);
}

inline Probe read_probe(std::istream& is) {
  char magic[4];
  io::read_exact(is, magic, 4, "probe magic");
  if (!std::equal(magic, magic + 4, kProbeMagic)) throw FormatError("bad probe magic (expected IGBP)");
  const auto version = io::get_u32(is, "probe version");
  if (version != kProbeFormatVersion) throw VersionError("unsupported probe format version " + std::to_string(version));
  ProbeArchitecture arch;
  const auto mode = io::get_u32(is, "probe mode");
  if (mode > 1) throw HeaderError("bad probe mode");
  arch.mode = static_cast<ProbeMode>(mode);
  arch.bias = io::get_u8(is, "probe bias flag") != 0;
  arch.input_dim = io::get_u64(is, "probe input dim");
  const auto n_hidden = io::get_u64(is, "probe depth");
  if (n_hidden > 1024) throw HeaderError("implausible probe depth");
  for (std::uint64_t i = 0; i < n_hidden; ++i) arch.hidden.push_back(io::get_u64(is, "probe width"));
  try {
    arch.validate();
  } catch (const InputError& e) {
    throw HeaderError(e.what());
  }
  Probe p(arch);
  const auto n_params = io::get_u64(is, "probe parameter count");
  if (n_params != p.params.size()) throw HeaderError("probe parameter count does not match architecture");
  for (auto& v : p.params) v = io::get_f64(is, "probe parameters");
  return p;
}

}  // namespace igbp
