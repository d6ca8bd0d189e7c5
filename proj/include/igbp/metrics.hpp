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

// Evaluation battery: leakage, TPR gap, online-code MDL compression, WEAT,
// similarity correlation and bias-by-neighbors.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "igbp/data.hpp"
#include "igbp/error.hpp"
#include "igbp/io.hpp"
#include "igbp/numerics.hpp"
#include "igbp/probe.hpp"

namespace igbp {

// ---------------------------------------------------------------------------
// Leakage

// Two hidden ReLU layers of 512, a stronger and differently shaped adversary
// than the one-hidden-layer probes used during erasure.
inline ProbeArchitecture default_adversary(std::size_t dim) { return ProbeArchitecture::mlp(dim, {512, 512}); }

// Test accuracy (percent) of a freshly trained adversary.
inline double leakage(const Matrix& x_train, std::span<const double> z_train, const Matrix& x_test,
                      std::span<const double> z_test, const ProbeArchitecture& arch, const TrainConfig& cfg, Rng& rng) {
  check_binary_labels(z_test, 1);
  const Probe adv = train_probe(x_train, z_train, arch, cfg, rng);
  return 100.0 * accuracy(adv, x_test, z_test);
}

struct LeakageSummary {
  std::vector<double> runs;  // percent
  double mean = 0.0;
  double sd = 0.0;
};

// Adversary retrained under `seeds` derived seeds; mean and sample sd.
inline LeakageSummary leakage_repeated(const Matrix& x_train, std::span<const double> z_train, const Matrix& x_test,
                                       std::span<const double> z_test, const ProbeArchitecture& arch,
                                       const TrainConfig& cfg, std::uint64_t seed, std::size_t seeds = 3) {
  LeakageSummary s;
  for (std::size_t k = 0; k < seeds; ++k) {
    Rng rng(derive_seed(seed, 7000 + k));
    s.runs.push_back(leakage(x_train, z_train, x_test, z_test, arch, cfg, rng));
  }
  s.mean = mean(s.runs);
  s.sd = sample_sd(s.runs);
  return s;
}

// ---------------------------------------------------------------------------
// TPR gap

struct ClassGap {
  int label = 0;
  double tpr_group1 = 0.0;  // z = 1
  double tpr_group0 = 0.0;  // z = 0
  double gap = 0.0;         // tpr_group1 - tpr_group0
  bool excluded = false;    // class absent from one group
};

struct FairnessReport {
  std::vector<ClassGap> classes;
  double rms_gap = 0.0;
  double accuracy = 0.0;
  std::vector<int> flagged;  // labels excluded from the RMS
};

// Per-class TPR for each z group, signed gaps, and their root mean square
// over the classes present in both groups.
inline FairnessReport tpr_gap(std::span<const int> y_true, std::span<const int> y_pred, std::span<const double> z) {
  if (y_true.size() != y_pred.size() || y_true.size() != z.size()) throw ShapeError("tpr_gap: length mismatch");
  std::map<int, std::array<std::size_t, 4>> counts;  // label -> {n0, hit0, n1, hit1}
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (z[i] != 0.0 && z[i] != 1.0) throw InputError("tpr_gap: z must be binary");
    auto& c = counts[y_true[i]];
    const std::size_t g = z[i] > 0.5 ? 2 : 0;
    ++c[g];
    const bool hit = y_pred[i] == y_true[i];
    c[g + 1] += hit;
    hits += hit;
  }
  FairnessReport r;
  r.accuracy = y_true.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(y_true.size());
  double sq = 0.0;
  std::size_t used = 0;
  for (const auto& [label, c] : counts) {
    ClassGap g;
    g.label = label;
    if (c[0] == 0 || c[2] == 0) {
      g.excluded = true;
      r.flagged.push_back(label);
    } else {
      g.tpr_group0 = static_cast<double>(c[1]) / static_cast<double>(c[0]);
      g.tpr_group1 = static_cast<double>(c[3]) / static_cast<double>(c[2]);
      g.gap = g.tpr_group1 - g.tpr_group0;
      sq += g.gap * g.gap;
      ++used;
    }
    r.classes.push_back(g);
  }
  r.rms_gap = used ? std::sqrt(sq / static_cast<double>(used)) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// MDL (online code)

inline const std::vector<double>& default_mdl_fractions() {
  static const std::vector<double> f{2.0, 3.0, 4.4, 6.5, 9.5, 14.0, 21.0, 31.0, 45.7, 67.6, 100.0};
  return f;
}

struct MdlReport {
  std::vector<double> fractions;
  std::vector<std::size_t> block_ends;  // cumulative row counts
  std::vector<double> block_bits;       // block 0 is the uniform-coded first block
  double online_bits = 0.0;
  double uniform_bits = 0.0;
  double compression = 0.0;
  double final_model_bits = 0.0;  // codelength of the full-data model on the full training set
  double leakage = 0.0;           // percent, full-data model on the test rows
};

namespace detail {
inline double bits_of(std::span<const double> logits, std::span<const double> labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    s += (labels[i] > 0.5 ? softplus(-logits[i]) : softplus(logits[i]));
  return s / std::log(2.0);
}
}  // namespace detail

// Online codelength of binary z given x. The first block is sent at log2(K)
// bits per row; each later block is coded by a probe trained on all rows before
// it. Rows are used in the given order. Probes are checkpointed on dev
// cross-entropy, since codelength is what is being measured.
inline MdlReport mdl_compression(const Matrix& x_train, std::span<const double> z_train, const Matrix& x_test,
                                 std::span<const double> z_test, const ProbeArchitecture& arch,
                                 std::vector<double> fractions, TrainConfig cfg, Rng& rng) {
  if (x_train.rows() != z_train.size() || x_test.rows() != z_test.size()) throw ShapeError("mdl: label count mismatch");
  if (fractions.empty() || fractions.back() != 100.0) throw InputError("mdl: fractions must end at 100");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0) || (i && !(fractions[i] > fractions[i - 1])))
      throw InputError("mdl: fractions must be positive and strictly increasing");
  }
  check_binary_labels(z_train, 1);
  cfg.select_by = SelectBy::kLoss;
  const std::size_t n = x_train.rows();
  constexpr double kClasses = 2.0;
  MdlReport r;
  r.fractions = fractions;
  for (double f : fractions) {
    const auto end = static_cast<std::size_t>(std::floor(f / 100.0 * static_cast<double>(n)));
    const std::size_t prev = r.block_ends.empty() ? 0 : r.block_ends.back();
    if (end <= prev) {
      throw InputError("mdl: fraction " + io::format_double(f) + "% yields an empty block for " + std::to_string(n) +
                       " rows");
    }
    r.block_ends.push_back(end);
  }
  r.uniform_bits = static_cast<double>(n) * std::log2(kClasses);
  r.block_bits.push_back(static_cast<double>(r.block_ends[0]) * std::log2(kClasses));
  for (std::size_t b = 1; b < r.block_ends.size(); ++b) {
    const std::size_t lo = r.block_ends[b - 1], hi = r.block_ends[b];
    std::vector<std::size_t> prefix(lo), block(hi - lo);
    std::iota(prefix.begin(), prefix.end(), 0);
    std::iota(block.begin(), block.end(), lo);
    const Matrix xp = take_rows(x_train, prefix);
    const std::span<const double> zp = z_train.subspan(0, lo);
    std::vector<double> zb(z_train.begin() + static_cast<std::ptrdiff_t>(lo),
                           z_train.begin() + static_cast<std::ptrdiff_t>(hi));
    std::vector<double> logits;
    try {
      Rng block_rng = rng.fork(b);
      const Probe p = train_probe(xp, zp, arch, cfg, block_rng);
      logits = forward_batch(p, take_rows(x_train, block));
    } catch (const DegenerateDataError&) {
      // Too few rows of a class to fit a probe: code with the Laplace-smoothed prior.
      double ones = 0.0;
      for (double v : zp) ones += v > 0.5;
      const double p1 = (ones + 1.0) / (static_cast<double>(lo) + 2.0);
      logits.assign(block.size(), std::log(p1 / (1.0 - p1)));
    }
    r.block_bits.push_back(detail::bits_of(logits, zb));
  }
  for (double b : r.block_bits) r.online_bits += b;
  r.compression = r.uniform_bits / r.online_bits;

  Rng final_rng = rng.fork(r.block_ends.size() + 1);
  const Probe full = train_probe(x_train, z_train, arch, cfg, final_rng);
  r.final_model_bits = detail::bits_of(forward_batch(full, x_train), z_train);
  if (x_test.rows()) r.leakage = 100.0 * accuracy(full, x_test, z_test);
  return r;
}

// ---------------------------------------------------------------------------
// WEAT

struct WeatResult {
  double effect_size = 0.0;
  double p_value = 1.0;
  std::size_t permutations = 0;
  bool exact = false;
};

// s(w, A, B) = mean_a cos(w, a) - mean_b cos(w, b).
inline double weat_association(std::span<const double> w, const std::vector<std::vector<double>>& a,
                               const std::vector<std::vector<double>>& b) {
  double sa = 0.0, sb = 0.0;
  for (const auto& v : a) sa += cosine(w, v);
  for (const auto& v : b) sb += cosine(w, v);
  return sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // r * (n - k + i) / i stays exact; saturate rather than overflow.
    if (r > std::numeric_limits<std::uint64_t>::max() / (n - k + i)) return std::numeric_limits<std::uint64_t>::max();
    r = r * (n - k + i) / i;
  }
  return r;
}

// Effect size and one-sided permutation p-value from per-word associations:
// the first `nx` entries of `s` belong to X, the rest to Y. The test statistic
// is sum_X s - sum_Y s; p = P[stat(X_i, Y_i) > stat(X, Y)] over equal-size
// repartitions of X u Y. Exact enumeration when C(n, nx) <= exact_threshold,
// otherwise `mc_draws` random partitions, each drawn from its own derived seed.
inline WeatResult weat_from_associations(std::span<const double> s, std::size_t nx, std::uint64_t exact_threshold,
                                         std::size_t mc_draws, std::uint64_t seed) {
  const std::size_t n = s.size();
  if (nx == 0 || nx >= n) throw InputError("weat: both target sets must be non-empty");
  const double sd = sample_sd(s);
  if (!(sd > 0.0)) throw NumericError("weat: association scores have zero variance; d is undefined");
  const double mx = mean(s.subspan(0, nx));
  const double my = mean(s.subspan(nx));
  WeatResult r;
  r.effect_size = (mx - my) / sd;

  double total = 0.0;
  for (double v : s) total += v;
  auto stat_of_sum = [&](double sum_x) { return sum_x - (total - sum_x); };
  double obs_sum = 0.0;
  for (std::size_t i = 0; i < nx; ++i) obs_sum += s[i];
  const double observed = stat_of_sum(obs_sum);
  const double tol = 1e-12 * (1.0 + std::abs(observed));

  const std::uint64_t combos = binomial(n, nx);
  std::uint64_t exceed = 0;
  if (combos <= exact_threshold) {
    r.exact = true;
    std::vector<std::size_t> idx(nx);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      double sum = 0.0;
      for (auto i : idx) sum += s[i];
      exceed += stat_of_sum(sum) > observed + tol;
      ++r.permutations;
      // next combination in lexicographic order
      std::size_t k = nx;
      while (k > 0 && idx[k - 1] == n - nx + k - 1) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::size_t j = k; j < nx; ++j) idx[j] = idx[j - 1] + 1;
    }
  } else {
    if (mc_draws < 10000) throw InputError("weat: Monte-Carlo estimate needs at least 10000 draws");
    std::vector<std::size_t> perm(n);
    for (std::size_t d = 0; d < mc_draws; ++d) {
      Rng rng(derive_seed(seed, d));
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = 0; i < nx; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(perm[i], perm[j]);
      }
      std::sort(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(nx));
      double sum = 0.0;
      for (std::size_t i = 0; i < nx; ++i) sum += s[perm[i]];
      exceed += stat_of_sum(sum) > observed + tol;
    }
    r.permutations = mc_draws;
  }
  r.p_value = static_cast<double>(exceed) / static_cast<double>(r.permutations);
  return r;
}

inline WeatResult weat(const std::vector<std::string>& targets_x, const std::vector<std::string>& targets_y,
                       const std::vector<std::string>& attrs_a, const std::vector<std::string>& attrs_b,
                       const WordEmbeddings& emb, std::uint64_t exact_threshold = 1000000,
                       std::size_t mc_draws = 10000, std::uint64_t seed = 0) {
  if (targets_x.empty() || targets_y.empty() || attrs_a.empty() || attrs_b.empty())
    throw InputError("weat: word sets must be non-empty");
  auto vecs = [&](const std::vector<std::string>& words) {
    std::vector<std::vector<double>> out;
    for (const auto& w : words) {
      auto v = emb[w];
      out.emplace_back(v.begin(), v.end());
    }
    return out;
  };
  const auto a = vecs(attrs_a), b = vecs(attrs_b);
  std::vector<double> s;
  for (const auto& w : targets_x) s.push_back(weat_association(emb[w], a, b));
  for (const auto& w : targets_y) s.push_back(weat_association(emb[w], a, b));
  return weat_from_associations(s, targets_x.size(), exact_threshold, mc_draws, seed);
}

// ---------------------------------------------------------------------------
// Similarity correlation

struct ScoredPair {
  std::string first;
  std::string second;
  double score = 0.0;
};

// Pearson correlation between cosine similarity and human similarity scores.
inline double similarity_correlation(const WordEmbeddings& emb, const std::vector<ScoredPair>& pairs) {
  if (pairs.size() < 3) throw InputError("similarity_correlation: need at least 3 pairs");
  std::vector<double> model, human;
  for (const auto& p : pairs) {
    model.push_back(cosine(emb[p.first], emb[p.second]));
    human.push_back(p.score);
  }
  return pearson(model, human);
}

// "word1 word2 score" per line (SimLex-style, whitespace separated). A first
// line whose score field is not numeric is treated as a header.
inline std::vector<ScoredPair> parse_scored_pairs(const std::string& text) {
  std::istringstream is(text);
  std::vector<ScoredPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    ScoredPair p;
    std::string score;
    if (!(ls >> p.first >> p.second >> score)) continue;
    char* end = nullptr;
    p.score = std::strtod(score.c_str(), &end);
    if (*end != '\0') {
      if (line_no == 1) continue;
      throw FormatError("pairs line " + std::to_string(line_no) + ": bad score '" + score + "'");
    }
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bias by neighbors

struct NeighborBias {
  std::string word;
  double percent_group1 = 0.0;
  double percent_group0 = 0.0;
};

struct NeighborReport {
  std::vector<NeighborBias> words;
  std::optional<double> correlation;  // with the supplied bias-by-projection scores
};

// For each probe word, the share of its k nearest (cosine) labeled neighbors
// that carry each group label. The probe word itself is never its own neighbor.
inline NeighborReport bias_by_neighbors(const WordEmbeddings& emb, const std::vector<std::string>& probe_words,
                                        const std::unordered_map<std::string, int>& lexicon, std::size_t k,
                                        const std::vector<double>* projection_scores = nullptr) {
  if (k < 1) throw InputError("bias_by_neighbors: k must be >= 1");
  if (k >= emb.words.size()) throw InputError("bias_by_neighbors: k must be smaller than the vocabulary");
  if (projection_scores && projection_scores->size() != probe_words.size())
    throw ShapeError("bias_by_neighbors: one projection score per probe word required");
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < emb.words.size(); ++i)
    if (lexicon.count(emb.words[i])) labeled.push_back(i);

  NeighborReport r;
  for (const auto& w : probe_words) {
    auto v = emb[w];
    std::vector<std::pair<double, std::size_t>> sims;
    for (auto i : labeled) {
      if (emb.words[i] == w) continue;
      sims.emplace_back(cosine(v, emb.vectors.row(i)), i);
    }
    if (sims.size() < k) throw InputError("bias_by_neighbors: fewer than k labeled neighbors for '" + w + "'");
    std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::size_t ones = 0;
    for (std::size_t j = 0; j < k; ++j) ones += lexicon.at(emb.words[sims[j].second]) == 1;
    NeighborBias nb;
    nb.word = w;
    nb.percent_group1 = 100.0 * static_cast<double>(ones) / static_cast<double>(k);
    nb.percent_group0 = 100.0 - nb.percent_group1;
    r.words.push_back(nb);
  }
  if (projection_scores && probe_words.size() >= 2) {
    std::vector<double> pct;
    for (const auto& nb : r.words) pct.push_back(nb.percent_group1);
    try {
      r.correlation = pearson(pct, *projection_scores);
    } catch (const NumericError&) {
      r.correlation.reset();
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Welch two-sample t statistic for comparing repeated runs.
inline double welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InputError("welch_t: need at least two values per sample");
  const double va = sample_sd(a) * sample_sd(a) / static_cast<double>(a.size());
  const double vb = sample_sd(b) * sample_sd(b) / static_cast<double>(b.size());
  if (va + vb == 0.0) throw NumericError("welch_t: zero variance in both samples");
  return (mean(a) - mean(b)) / std::sqrt(va + vb);
}

// ---------------------------------------------------------------------------
// Report: named scalar metrics in insertion order, printable as an aligned
// table or as "metric,value" rows.

class MetricReport {
 public:
  void add(std::string name, double value) { entries_.emplace_back(std::move(name), value); }

  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

  std::optional<double> get(const std::string& name) const {
    for (const auto& [k, v] : entries_)
      if (k == name) return v;
    return std::nullopt;
  }

  std::string to_table() const {
    std::size_t w = 6;
    for (const auto& e : entries_) w = std::max(w, e.first.size());
    std::ostringstream os;
    os << "metric" << std::string(w - 6 + 2, ' ') << "value\n";
    for (const auto& [k, v] : entries_) os << k << std::string(w - k.size() + 2, ' ') << io::fixed(v, 6) << '\n';
    return os.str();
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "metric,value\n";
    for (const auto& [k, v] : entries_) os << k << ',' << io::format_double(v) << '\n';
    return os.str();
  }

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

}  // namespace igbp
