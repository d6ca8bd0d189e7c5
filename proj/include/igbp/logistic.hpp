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

// Multinomial logistic regression used as the main-task head. Trained full
// batch, so the result depends only on the data and the config.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "igbp/error.hpp"
#include "igbp/numerics.hpp"

namespace igbp {

struct LogisticConfig {
  std::size_t steps = 300;
  double lr = 0.05;
  double l2 = 1e-4;
};

class LogisticHead {
 public:
  LogisticHead() = default;
  LogisticHead(std::size_t dim, std::size_t classes)
      : dim_(dim), classes_(classes), w_(dim, classes), b_(classes, 0.0) {}

  std::size_t classes() const { return classes_; }

  // Inputs are standardized with the training mean/scale before the linear map.
  static LogisticHead fit(const Matrix& x, std::span<const int> y, const LogisticConfig& cfg = {}) {
    if (x.rows() != y.size()) throw ShapeError("logistic: label count mismatch");
    if (x.rows() == 0) throw DegenerateDataError("logistic: no training rows");
    int max_label = 0;
    for (int v : y) {
      if (v < 0) throw InputError("logistic: negative class label");
      max_label = std::max(max_label, v);
    }
    const std::size_t k = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
    const std::size_t n = x.rows(), d = x.cols();
    LogisticHead h(d, k);
    h.mu_.assign(d, 0.0);
    h.scale_.assign(d, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) h.mu_[j] += x(i, j);
    for (auto& m : h.mu_) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) var[j] += (x(i, j) - h.mu_[j]) * (x(i, j) - h.mu_[j]);
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(n));
      h.scale_[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    const Matrix xs = h.standardize(x);

    std::vector<double> params(d * k + k, 0.0), grad(params.size());
    AdamWState opt(params.size(), AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, 0.0});
    Matrix logits(n, k), probs(n, k);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      kernel::gemm(xs.data(), std::span<const double>(params.data(), d * k), logits.data(), n, d, k);
      for (std::size_t i = 0; i < n; ++i) {
        auto li = logits.row(i);
        double mx = -1e300;
        for (std::size_t c = 0; c < k; ++c) {
          li[c] += params[d * k + c];
          mx = std::max(mx, li[c]);
        }
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += (probs(i, c) = std::exp(li[c] - mx));
        for (std::size_t c = 0; c < k; ++c) {
          probs(i, c) /= s;
          if (static_cast<std::size_t>(y[i]) == c) probs(i, c) -= 1.0;
          probs(i, c) /= static_cast<double>(n);
        }
      }
      kernel::gemm_tn(xs.data(), probs.data(), std::span<double>(grad.data(), d * k), n, d, k);
      for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += probs(i, c);
        grad[d * k + c] = s;
      }
      for (std::size_t j = 0; j < d * k; ++j) grad[j] += cfg.l2 * params[j];
      adamw_step(params, grad, opt, step);
    }
    std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d * k), h.w_.data().begin());
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(d * k), params.end(), h.b_.begin());
    return h;
  }

  std::vector<int> predict(const Matrix& x) const {
    if (x.cols() != dim_) throw ShapeError("logistic: dimension mismatch");
    const Matrix xs = standardize(x);
    const Matrix logits = matmul(xs, w_);
    std::vector<int> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes_; ++c)
        if (logits(i, c) + b_[c] > logits(i, best) + b_[best]) best = c;
      out[i] = static_cast<int>(best);
    }
    return out;
  }

  double accuracy(const Matrix& x, std::span<const int> y) const {
    if (y.empty()) return 0.0;
    const auto pred = predict(x);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
    return static_cast<double>(hit) / static_cast<double>(y.size());
  }

 private:
  Matrix standardize(const Matrix& x) const {
    Matrix xs(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) xs(i, j) = (x(i, j) - mu_[j]) * scale_[j];
    return xs;
  }

  std::size_t dim_ = 0;
  std::size_t classes_ = 0;
  Matrix w_;
  std::vector<double> b_;
  std::vector<double> mu_;
  std::vector<double> scale_;
};

}  // namespace igbp
