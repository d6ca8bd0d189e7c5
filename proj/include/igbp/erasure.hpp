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

// Attribute erasure by iterated boundary projection.
//
// Each iteration trains a fresh probe f on the current representations and
// moves every row along the local normal of f onto the probe's zero-logit
// surface:
//
//   x_p = x - f(x) * grad f(x) / |grad f(x)|^2
//
// i.e. a gradient step on the projective loss L_P = f^2 / 2 with step size
// 1 / |grad f|^2. For a ReLU probe grad f is the weight vector of the affine
// piece containing x, so the step lands exactly on that piece's boundary; for
// a bias-free linear probe it is the null-space projection used by INLP.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "igbp/data.hpp"
#include "igbp/error.hpp"
#include "igbp/io.hpp"
#include "igbp/logistic.hpp"
#include "igbp/numerics.hpp"
#include "igbp/probe.hpp"

namespace igbp {

inline constexpr double kDefaultGradEps = 1e-10;

// ---------------------------------------------------------------------------
// Losses

struct CrossEntropyEval {
  double p_t = 0.0;  // probability assigned to the true class
  double loss = 0.0;
  std::vector<double> grad_x;
};

// y in {+1, -1}; p = sigmoid(f) is P(y = +1). loss = -log p_t evaluated as
// softplus(-y f), grad = -y (1 - p_t) grad f.
inline CrossEntropyEval ce_loss_and_grad(const Probe& p, std::span<const double> x, int y) {
  if (y != 1 && y != -1) throw InputError("ce_loss_and_grad: y must be +1 or -1");
  if (p.arch.mode != ProbeMode::kClassifier) throw ModeError("cross-entropy needs a classifier probe");
  const auto lm = local_model(p, x);
  const double margin = static_cast<double>(y) * lm.logit;
  CrossEntropyEval out;
  out.p_t = sigmoid(margin);
  out.loss = softplus(-margin);
  // 1 - p_t = sigmoid(-margin), computed directly to keep precision at large margins.
  const double scale = -static_cast<double>(y) * sigmoid(-margin);
  out.grad_x.resize(lm.gradient.size());
  for (std::size_t i = 0; i < lm.gradient.size(); ++i) out.grad_x[i] = scale * lm.gradient[i];
  return out;
}

struct ProjectiveLossEval {
  double p_t = 0.5;  // sigmoid(f); the loss is symmetric in p_t <-> 1 - p_t
  double logit = 0.0;
  double loss = 0.0;
  std::vector<double> grad_x;
};

// log(p_t) - log(1 - p_t) = +-f, so L_P = f^2 / 2 and grad L_P = f grad f,
// independent of the label.
inline ProjectiveLossEval projective_loss_and_grad(const Probe& p, std::span<const double> x) {
  if (p.arch.mode != ProbeMode::kClassifier) throw ModeError("projective loss needs a classifier probe");
  const auto lm = local_model(p, x);
  ProjectiveLossEval out;
  out.logit = lm.logit;
  out.p_t = sigmoid(lm.logit);
  out.loss = 0.5 * lm.logit * lm.logit;
  out.grad_x.resize(lm.gradient.size());
  for (std::size_t i = 0; i < lm.gradient.size(); ++i) out.grad_x[i] = lm.logit * lm.gradient[i];
  return out;
}

// ---------------------------------------------------------------------------
// Single-step projections

struct ProjectionStep {
  std::vector<double> point;
  double logit = 0.0;
  bool skipped = false;  // |grad f| <= eps: left unchanged
};

namespace detail {
inline ProjectionStep project_along_gradient(const Probe& p, std::span<const double> x, double eps_grad) {
  const auto lm = local_model(p, x);
  ProjectionStep out;
  out.logit = lm.logit;
  out.point.assign(x.begin(), x.end());
  const double g2 = squared_norm(lm.gradient);
  if (!(std::sqrt(g2) > eps_grad)) {
    out.skipped = true;
    return out;
  }
  // x - lambda_P * grad L_P with lambda_P = 1 / |grad f|^2 and grad L_P = f grad f.
  const double step = lm.logit / g2;
  for (std::size_t i = 0; i < x.size(); ++i) out.point[i] = x[i] - step * lm.gradient[i];
  return out;
}
}  // namespace detail

inline ProjectionStep project_to_boundary(const Probe& p, std::span<const double> x,
                                          double eps_grad = kDefaultGradEps) {
  if (p.arch.mode != ProbeMode::kClassifier) throw ModeError("project_to_boundary needs a classifier probe");
  return detail::project_along_gradient(p, x, eps_grad);
}

// Continuous attribute: drive the regressor output to the non-informative value 0.
inline ProjectionStep project_regression(const Probe& p, std::span<const double> x,
                                         double eps_grad = kDefaultGradEps) {
  if (p.arch.mode != ProbeMode::kRegressor) throw ModeError("project_regression needs a regressor probe");
  return detail::project_along_gradient(p, x, eps_grad);
}

// x - (x.theta / theta.theta) theta.
inline std::vector<double> nullspace_project(std::span<const double> theta, std::span<const double> x) {
  if (theta.size() != x.size()) throw ShapeError("nullspace_project: dimension mismatch");
  const double tt = squared_norm(theta);
  std::vector<double> out(x.begin(), x.end());
  if (tt == 0.0) return out;
  const double coef = dot(x, theta) / tt;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] -= coef * theta[i];
  return out;
}

// Replaces a linear probe's weights by their orthogonal projection on the row
// space of `x`. Logits on every row of `x` are unchanged; the removed component
// is not identifiable from the data. Keeps successive linear projections inside
// the current data subspace, so each one removes exactly one dimension.
inline void restrict_to_row_space(Probe& p, const Matrix& x) {
  if (!p.arch.is_linear()) throw ModeError("restrict_to_row_space applies to linear probes only");
  const Matrix basis = row_space_basis(x);
  auto theta = p.theta();
  std::vector<double> coeffs(basis.cols(), 0.0), out(theta.size(), 0.0);
  for (std::size_t k = 0; k < basis.cols(); ++k)
    for (std::size_t i = 0; i < theta.size(); ++i) coeffs[k] += basis(i, k) * theta[i];
  for (std::size_t i = 0; i < theta.size(); ++i)
    for (std::size_t k = 0; k < basis.cols(); ++k) out[i] += basis(i, k) * coeffs[k];
  std::copy(out.begin(), out.end(), theta.begin());
}

// ---------------------------------------------------------------------------
// Stopping

enum class StopReason { kNone, kProbeAtChance, kAccuracyFloor, kMaxIterations };

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::kNone: return "none";
    case StopReason::kProbeAtChance: return "probe-at-chance";
    case StopReason::kAccuracyFloor: return "accuracy-floor";
    case StopReason::kMaxIterations: return "max-iterations";
  }
  return "?";
}

inline StopReason parse_stop_reason(const std::string& s) {
  for (auto r : {StopReason::kNone, StopReason::kProbeAtChance, StopReason::kAccuracyFloor, StopReason::kMaxIterations})
    if (s == stop_reason_name(r)) return r;
  throw FormatError("unknown stop reason '" + s + "'");
}

struct StoppingCriteria {
  double probe_acc_margin = 0.02;
  double main_acc_floor_ratio = 0.98;
  std::size_t max_iterations = 20;
  bool use_probe_rule = true;
  bool use_floor_rule = true;

  void validate() const {
    if (!(probe_acc_margin >= 0.0)) throw ConfigError("stop.probe_acc_margin must be >= 0");
    if (!(main_acc_floor_ratio > 0.0 && main_acc_floor_ratio <= 1.0))
      throw ConfigError("stop.main_acc_floor_ratio must be in (0, 1]");
    if (max_iterations < 1) throw ConfigError("stop.max_iterations must be >= 1");
  }
};

struct ReportRow {
  std::size_t iteration = 0;  // 1-based
  double probe_acc = 0.0;     // new probe, dev split, before this iteration's projection
  double majority = 0.0;      // dev-split majority rate of z
  double main_acc = 0.0;      // main-task dev accuracy after the projection (unchanged if not applied)
  std::size_t skipped = 0;    // rows with |grad f| <= eps
  double region_crossing = 0.0;  // fraction of projected rows whose activation pattern changed
  double mean_displacement = 0.0;
  StopReason stop = StopReason::kNone;
};

struct StopDecision {
  bool stop = false;
  StopReason reason = StopReason::kNone;
};

// Stop iff the probe is within `margin` of the majority rate, or main accuracy
// falls below floor_ratio * original, or the iteration budget is spent.
inline StopDecision check_stop(const ReportRow& row, double original_main_acc, const StoppingCriteria& c) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(row.probe_acc) || !in_unit(row.majority) || !in_unit(row.main_acc) || !in_unit(original_main_acc))
    throw InputError("check_stop: accuracies must lie in [0, 1]");
  constexpr double kSlack = 1e-12;  // absorbs decimal rounding of the thresholds
  if (c.use_probe_rule && row.probe_acc <= row.majority + c.probe_acc_margin + kSlack)
    return {true, StopReason::kProbeAtChance};
  if (c.use_floor_rule && row.main_acc < c.main_acc_floor_ratio * original_main_acc - kSlack)
    return {true, StopReason::kAccuracyFloor};
  if (row.iteration >= c.max_iterations) return {true, StopReason::kMaxIterations};
  return {};
}

struct ErasureReport {
  double original_main_acc = 0.0;
  std::vector<ReportRow> rows;
  StopReason stop_reason = StopReason::kNone;

  std::string to_csv() const {
    std::ostringstream os;
    os << "iteration,probe_acc,majority,main_acc,skipped,region_crossing,mean_displacement,stop_reason\n";
    for (const auto& r : rows) {
      os << r.iteration << ',' << io::format_double(r.probe_acc) << ',' << io::format_double(r.majority) << ','
         << io::format_double(r.main_acc) << ',' << r.skipped << ',' << io::format_double(r.region_crossing) << ','
         << io::format_double(r.mean_displacement) << ',' << stop_reason_name(r.stop) << '\n';
    }
    return os.str();
  }

  std::string to_table() const {
    std::ostringstream os;
    os << "original main accuracy: " << io::fixed(original_main_acc, 4) << "\n";
    os << " iter  probe_acc  majority  main_acc  leakage%  skipped  crossing  displacement  stop\n";
    for (const auto& r : rows) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%5zu  %9.4f  %8.4f  %8.4f  %8.2f  %7zu  %8.4f  %12.6f  %s\n", r.iteration,
                    r.probe_acc, r.majority, r.main_acc, 100.0 * r.probe_acc, r.skipped, r.region_crossing,
                    r.mean_displacement, stop_reason_name(r.stop));
      os << buf;
    }
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Projection stack

enum class ProjectionMethod { kGradient, kNullspace };

inline const char* method_name(ProjectionMethod m) { return m == ProjectionMethod::kGradient ? "igbp" : "inlp"; }

struct IterationMeta {
  double probe_acc = 0.0;
  double majority = 0.0;
};

struct ProjectionStack {
  ProjectionMethod method = ProjectionMethod::kGradient;
  std::size_t input_dim = 0;
  std::vector<Probe> probes;
  std::vector<IterationMeta> meta;
  StopReason stop_reason = StopReason::kNone;
  std::uint64_t seed = 0;
  double eps_grad = kDefaultGradEps;

  friend bool operator==(const ProjectionStack&, const ProjectionStack&) = default;
};

// One probe's projection applied to one row, dispatching on the stack method.
inline ProjectionStep project_row(const Probe& p, ProjectionMethod method, std::span<const double> x, double eps_grad) {
  if (method == ProjectionMethod::kNullspace) {
    ProjectionStep out;
    out.logit = forward(p, x);
    const auto theta = p.theta();
    if (!(norm(theta) > eps_grad)) {
      out.point.assign(x.begin(), x.end());
      out.skipped = true;
      return out;
    }
    out.point = nullspace_project(theta, x);
    return out;
  }
  return p.arch.mode == ProbeMode::kRegressor ? project_regression(p, x, eps_grad) : project_to_boundary(p, x, eps_grad);
}

struct ProjectionPassStats {
  std::size_t skipped = 0;
  std::size_t crossed = 0;
  double total_displacement = 0.0;
};

// Projects every row of `x` in place with one probe. Rows are independent;
// per-row results are written to disjoint slots and reduced in row order.
inline ProjectionPassStats projection_pass(const Probe& p, ProjectionMethod method, Matrix& x, double eps_grad,
                                           bool track_regions) {
  const std::size_t n = x.rows();
  std::vector<std::uint8_t> skipped(n, 0), crossed(n, 0);
  std::vector<double> disp(n, 0.0);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto row = x.row(i);
      std::vector<std::uint8_t> before;
      if (track_regions) before = activation_pattern(p, row);
      auto step = project_row(p, method, row, eps_grad);
      skipped[i] = step.skipped;
      double d2 = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) d2 += (step.point[j] - row[j]) * (step.point[j] - row[j]);
      disp[i] = std::sqrt(d2);
      if (track_regions && !step.skipped) crossed[i] = activation_pattern(p, step.point) != before;
      std::copy(step.point.begin(), step.point.end(), row.begin());
    }
  });
  ProjectionPassStats s;
  for (std::size_t i = 0; i < n; ++i) {
    s.skipped += skipped[i];
    s.crossed += crossed[i];
    s.total_displacement += disp[i];
  }
  return s;
}

inline Matrix apply_stack(const ProjectionStack& stack, const Matrix& x) {
  if (!stack.probes.empty() && x.cols() != stack.input_dim) {
    throw ShapeError("apply_stack: stack expects dimension " + std::to_string(stack.input_dim) + ", data has " +
                     std::to_string(x.cols()));
  }
  Matrix out = x;
  for (const auto& p : stack.probes) projection_pass(p, stack.method, out, stack.eps_grad, false);
  return out;
}

// Mean Euclidean distance moved when the stack is applied once more to
// already-transformed rows. Reported, not asserted: region shifts mean the
// map is not idempotent for non-linear probes.
inline double reapplication_distance(const ProjectionStack& stack, const Matrix& transformed) {
  if (transformed.rows() == 0) return 0.0;
  const Matrix again = apply_stack(stack, transformed);
  double total = 0.0;
  for (std::size_t i = 0; i < again.rows(); ++i) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < again.cols(); ++j) {
      const double d = again(i, j) - transformed(i, j);
      d2 += d * d;
    }
    total += std::sqrt(d2);
  }
  return total / static_cast<double>(again.rows());
}

// Stack file: a text header terminated by a line "end", followed by the
// concatenated binary probe records.
inline constexpr std::uint32_t kStackFormatVersion = 1;

inline void write_stack(std::ostream& os, const ProjectionStack& s) {
  os << "IGBP-STACK\n";
  os << "format_version " << kStackFormatVersion << '\n';
  os << "method " << method_name(s.method) << '\n';
  os << "input_dim " << s.input_dim << '\n';
  os << "iterations " << s.probes.size() << '\n';
  os << "stop_reason " << stop_reason_name(s.stop_reason) << '\n';
  os << "seed " << s.seed << '\n';
  os << "eps_grad " << io::format_double(s.eps_grad) << '\n';
  for (std::size_t i = 0; i < s.meta.size(); ++i) {
    os << "iter " << i + 1 << " probe_acc " << io::format_double(s.meta[i].probe_acc) << " majority "
       << io::format_double(s.meta[i].majority) << '\n';
  }
  os << "end\n";
  for (const auto& p : s.probes) write_probe(os, p);
}

inline std::string stack_to_bytes(const ProjectionStack& s) {
  std::ostringstream os(std::ios::binary);
  write_stack(os, s);
  return os.str();
}

inline ProjectionStack read_stack(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "IGBP-STACK") throw FormatError("bad stack magic (expected IGBP-STACK)");
  ProjectionStack s;
  std::size_t iterations = 0;
  bool have_version = false, have_dim = false, have_iters = false;
  while (true) {
    if (!std::getline(is, line)) throw HeaderError("stack header not terminated by 'end'");
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format_version") {
      std::uint32_t v = 0;
      if (!(ls >> v)) throw HeaderError("bad format_version line");
      if (v != kStackFormatVersion) throw VersionError("unsupported stack format version " + std::to_string(v));
      have_version = true;
    } else if (key == "method") {
      std::string m;
      ls >> m;
      if (m == "igbp") s.method = ProjectionMethod::kGradient;
      else if (m == "inlp") s.method = ProjectionMethod::kNullspace;
      else throw HeaderError("unknown projection method '" + m + "'");
    } else if (key == "input_dim") {
      if (!(ls >> s.input_dim)) throw HeaderError("bad input_dim line");
      have_dim = true;
    } else if (key == "iterations") {
      if (!(ls >> iterations)) throw HeaderError("bad iterations line");
      have_iters = true;
    } else if (key == "stop_reason") {
      std::string r;
      ls >> r;
      s.stop_reason = parse_stop_reason(r);
    } else if (key == "seed") {
      if (!(ls >> s.seed)) throw HeaderError("bad seed line");
    } else if (key == "eps_grad") {
      std::string v;
      ls >> v;
      s.eps_grad = std::strtod(v.c_str(), nullptr);
    } else if (key == "iter") {
      std::size_t k;
      std::string a, b;
      IterationMeta m;
      if (!(ls >> k >> a >> m.probe_acc >> b >> m.majority) || a != "probe_acc" || b != "majority")
        throw HeaderError("bad iter line: " + line);
      s.meta.push_back(m);
    } else {
      throw HeaderError("unknown stack header key '" + key + "'");
    }
  }
  if (!have_version || !have_dim || !have_iters) throw HeaderError("stack header missing required keys");
  for (std::size_t i = 0; i < iterations; ++i) {
    Probe p = read_probe(is);
    if (p.arch.input_dim != s.input_dim) throw HeaderError("probe dimension differs from stack input_dim");
    s.probes.push_back(std::move(p));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw PayloadLengthError("trailing bytes after stack probes");
  return s;
}

inline ProjectionStack stack_from_bytes(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  return read_stack(is);
}

// ---------------------------------------------------------------------------
// Iterative runs

// Main-task accuracy of representations: fit on `train`, score on `eval`.
using MainTaskEval = std::function<double(const SplitData& train, const SplitData& eval)>;

inline MainTaskEval logistic_main_task(LogisticConfig cfg = {}) {
  return [cfg](const SplitData& train, const SplitData& eval) {
    return LogisticHead::fit(train.x, train.y, cfg).accuracy(eval.x, eval.y);
  };
}

struct ErasureResult {
  Dataset clean;  // all splits transformed
  ProjectionStack stack;
  ErasureReport report;
};

// Thrown when a probe cannot be trained mid-run; carries everything done so far.
class ErasureAborted : public TrainingError {
 public:
  ErasureAborted(const std::string& what, std::shared_ptr<ErasureResult> partial)
      : TrainingError(what), partial_(std::move(partial)) {}
  const ErasureResult& partial() const { return *partial_; }

 private:
  std::shared_ptr<ErasureResult> partial_;
};

struct ErasureOptions {
  double eps_grad = kDefaultGradEps;
  // Called after each iteration with the new report row.
  std::function<void(const ReportRow&, const Dataset&)> on_iteration;
};

namespace detail {

inline ErasureResult run_erasure(const Dataset& data, ProbeArchitecture arch, const TrainConfig& cfg,
                                 const StoppingCriteria& stop, const MainTaskEval& main_eval, std::uint64_t seed,
                                 ProjectionMethod method, const ErasureOptions& opts) {
  data.validate();
  stop.validate();
  cfg.validate();
  if (arch.input_dim == 0) arch.input_dim = data.dim();
  arch.validate();
  if (arch.input_dim != data.dim()) throw ShapeError("probe input_dim differs from data dimension");
  const bool regression = data.z_continuous;
  arch.mode = regression ? ProbeMode::kRegressor : ProbeMode::kClassifier;
  if (method == ProjectionMethod::kNullspace && (regression || !arch.is_linear() || arch.bias))
    throw InputError("null-space projection requires a bias-free linear classifier");

  auto result = std::make_shared<ErasureResult>();
  result->clean = data;
  result->stack.method = method;
  result->stack.input_dim = data.dim();
  result->stack.seed = seed;
  result->stack.eps_grad = opts.eps_grad;
  Dataset& cur = result->clean;

  auto train_rows = data.indices(Split::kTrain);
  auto dev_rows = data.indices(Split::kDev);
  if (train_rows.empty()) throw DegenerateDataError("dataset has no train rows");
  if (dev_rows.empty()) dev_rows = train_rows;

  result->report.original_main_acc = main_eval(cur.subset(train_rows), cur.subset(dev_rows));
  const bool track_regions = !arch.is_linear();
  double last_main_acc = result->report.original_main_acc;

  for (std::size_t it = 1;; ++it) {
    const SplitData train = cur.subset(train_rows);
    const SplitData dev = cur.subset(dev_rows);
    Rng probe_rng(derive_seed(seed, it));
    Probe probe;
    try {
      probe = train_probe(train.x, train.z, arch, cfg, probe_rng);
    } catch (const Error& e) {
      result->stack.stop_reason = StopReason::kNone;
      throw ErasureAborted(std::string("probe training failed at iteration ") + std::to_string(it) + ": " + e.what(),
                           result);
    }
    if (arch.is_linear() && !arch.bias) restrict_to_row_space(probe, train.x);

    ReportRow row;
    row.iteration = it;
    if (regression) {
      // Dev "accuracy" for a regressor: fraction of variance explained, clamped to [0, 1].
      const auto pred = forward_batch(probe, dev.x);
      const double mu = mean(dev.z);
      double ss_res = 0.0, ss_tot = 0.0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        ss_res += (pred[i] - dev.z[i]) * (pred[i] - dev.z[i]);
        ss_tot += (dev.z[i] - mu) * (dev.z[i] - mu);
      }
      row.probe_acc = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 0.0;
      row.majority = 0.0;
    } else {
      row.probe_acc = accuracy(probe, dev.x, dev.z);
      row.majority = majority_rate(dev.z);
    }

    // A probe at chance carries nothing left to remove: the run ends without
    // applying it, so the final projection never adds noise of its own.
    row.main_acc = last_main_acc;
    if (const auto early = check_stop(row, result->report.original_main_acc, stop);
        early.reason == StopReason::kProbeAtChance) {
      row.stop = early.reason;
      result->report.rows.push_back(row);
      if (opts.on_iteration) opts.on_iteration(row, cur);
      result->report.stop_reason = early.reason;
      result->stack.stop_reason = early.reason;
      break;
    }

    const auto pass = projection_pass(probe, method, cur.x, opts.eps_grad, track_regions);
    const std::size_t moved = cur.size() - pass.skipped;
    row.skipped = pass.skipped;
    row.region_crossing = moved ? static_cast<double>(pass.crossed) / static_cast<double>(moved) : 0.0;
    row.mean_displacement = pass.total_displacement / static_cast<double>(cur.size());
    row.main_acc = main_eval(cur.subset(train_rows), cur.subset(dev_rows));
    last_main_acc = row.main_acc;

    result->stack.probes.push_back(std::move(probe));
    result->stack.meta.push_back({row.probe_acc, row.majority});

    const auto decision = check_stop(row, result->report.original_main_acc, stop);
    row.stop = decision.reason;
    result->report.rows.push_back(row);
    if (opts.on_iteration) opts.on_iteration(row, cur);
    if (decision.stop) {
      result->report.stop_reason = decision.reason;
      result->stack.stop_reason = decision.reason;
      break;
    }
  }
  return std::move(*result);
}

}  // namespace detail

// Iterated gradient-based projection with probes of architecture `arch`
// (input_dim 0 means "take it from the data"). A continuous z switches the
// probes to regressors. Train, dev and test rows are all transformed by every
// applied probe; probes are fit on train and stopping is judged on dev. The
// probe that reaches chance ends the run and is reported but not applied.
inline ErasureResult igbp_run(const Dataset& data, const ProbeArchitecture& arch, const TrainConfig& cfg,
                              const StoppingCriteria& stop, std::uint64_t seed,
                              const MainTaskEval& main_eval = logistic_main_task(), const ErasureOptions& opts = {}) {
  return detail::run_erasure(data, arch, cfg, stop, main_eval, seed, ProjectionMethod::kGradient, opts);
}

// Linear special case: bias-free linear probes and the closed-form null-space
// projection x - (x.theta / theta.theta) theta.
inline ErasureResult inlp_run(const Dataset& data, const TrainConfig& cfg, const StoppingCriteria& stop,
                              std::uint64_t seed, const MainTaskEval& main_eval = logistic_main_task(),
                              const ErasureOptions& opts = {}) {
  return detail::run_erasure(data, ProbeArchitecture::linear(data.dim()), cfg, stop, main_eval, seed,
                             ProjectionMethod::kNullspace, opts);
}

}  // namespace igbp
