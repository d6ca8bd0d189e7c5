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

// Datasets of (x, y, z) rows: representation, main-task label, protected
// attribute. Loaders for the delimited-text and EMBD binary formats, GloVe-style
// word vectors, stratified splitting, and the synthetic generators.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "igbp/error.hpp"
#include "igbp/io.hpp"
#include "igbp/numerics.hpp"

namespace igbp {

enum class Split : std::uint8_t { kTrain = 0, kDev = 1, kTest = 2 };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split name '" + s + "'");
}

// Rows of one split, materialized.
struct SplitData {
  Matrix x;
  std::vector<int> y;
  std::vector<double> z;
  std::vector<std::size_t> rows;  // indices into the parent dataset
};

struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::vector<double> z;
  bool z_continuous = false;
  std::vector<std::string> ids;  // optional; empty or one per row
  std::vector<Split> split;      // optional; empty means every row is train

  std::size_t size() const { return x.rows(); }
  std::size_t dim() const { return x.cols(); }
  bool has_splits() const { return !split.empty(); }

  void validate() const {
    const std::size_t n = x.rows();
    if (y.size() != n || z.size() != n) throw ShapeError("dataset: x/y/z row counts differ");
    if (!ids.empty() && ids.size() != n) throw ShapeError("dataset: id count differs from rows");
    if (!split.empty() && split.size() != n) throw ShapeError("dataset: split count differs from rows");
    if (!x.all_finite()) throw InputError("dataset: non-finite representation entries");
    if (!z_continuous) {
      for (double v : z)
        if (v != 0.0 && v != 1.0) throw InputError("dataset: binary z must be 0 or 1");
    }
  }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if ((split.empty() ? Split::kTrain : split[i]) == s) out.push_back(i);
    return out;
  }

  SplitData view(Split s) const { return subset(indices(s)); }

  SplitData subset(std::vector<std::size_t> rows) const {
    SplitData d;
    d.x = take_rows(x, rows);
    d.y.reserve(rows.size());
    d.z.reserve(rows.size());
    for (auto r : rows) {
      d.y.push_back(y[r]);
      d.z.push_back(z[r]);
    }
    d.rows = std::move(rows);
    return d;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Rate of the most frequent binary label.
inline double majority_rate(std::span<const double> z) {
  if (z.empty()) return 0.0;
  std::size_t ones = 0;
  for (double v : z) ones += v > 0.5;
  const double p = static_cast<double>(ones) / static_cast<double>(z.size());
  return std::max(p, 1.0 - p);
}

// ---------------------------------------------------------------------------
// Paths

inline constexpr const char* kDataRootEnv = "IGBP_DATA_ROOT";

// Absolute paths pass through; relative ones resolve against $IGBP_DATA_ROOT
// when it is set, else against the working directory.
inline std::filesystem::path resolve_data_path(const std::filesystem::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kDataRootEnv); root && *root) return std::filesystem::path(root) / p;
  return p;
}

// ---------------------------------------------------------------------------
// Delimited text: header row names the columns. Reserved names are y, z, id,
// word and split; every other column is an embedding coordinate. Comma or tab
// delimited (autodetected from the header), '.' decimal point.

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_number(const std::string& s, std::size_t line_no) {
  const char* b = s.c_str();
  char* e = nullptr;
  // strtod honours the C locale only; the library never calls setlocale.
  const double v = std::strtod(b, &e);
  if (e == b || *e != '\0' || !std::isfinite(v)) {
    throw FormatError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline Dataset parse_delimited(const std::string& text) {
  std::istringstream is(text);
  std::string header;
  if (!std::getline(is, header) || header.empty()) throw HeaderError("missing header row");
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  const auto cols = detail::split_line(header, delim);
  int y_col = -1, z_col = -1, id_col = -1, split_col = -1;
  std::vector<std::size_t> emb_cols;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto& c = cols[i];
    if (c.empty()) throw HeaderError("empty column name at position " + std::to_string(i));
    auto claim = [&](int& slot) {
      if (slot >= 0) throw HeaderError("duplicate column '" + c + "'");
      slot = static_cast<int>(i);
    };
    if (c == "y") claim(y_col);
    else if (c == "z") claim(z_col);
    else if (c == "id" || c == "word") claim(id_col);
    else if (c == "split") claim(split_col);
    else emb_cols.push_back(i);
  }
  if (z_col < 0) throw HeaderError("header has no 'z' column");
  if (emb_cols.empty()) throw HeaderError("header names no embedding columns");

  Dataset ds;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 1, n = 0;
  bool continuous = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_line(line, delim);
    if (f.size() != cols.size()) {
      throw RowLengthError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols.size()) +
                           " fields, got " + std::to_string(f.size()));
    }
    for (auto c : emb_cols) values.push_back(detail::parse_number(f[c], line_no));
    if (y_col >= 0) {
      const double yv = detail::parse_number(f[static_cast<std::size_t>(y_col)], line_no);
      if (yv != std::floor(yv) || yv < 0) throw FormatError("line " + std::to_string(line_no) + ": y must be a non-negative integer");
      ds.y.push_back(static_cast<int>(yv));
    } else {
      ds.y.push_back(0);
    }
    const double zv = detail::parse_number(f[static_cast<std::size_t>(z_col)], line_no);
    if (zv != 0.0 && zv != 1.0) continuous = true;
    ds.z.push_back(zv);
    if (id_col >= 0) ds.ids.push_back(f[static_cast<std::size_t>(id_col)]);
    if (split_col >= 0) ds.split.push_back(parse_split(f[static_cast<std::size_t>(split_col)]));
    ++n;
  }
  ds.x = Matrix(n, emb_cols.size(), std::move(values));
  ds.z_continuous = continuous;
  ds.validate();
  return ds;
}

inline std::string format_delimited(const Dataset& ds, char delim = ',') {
  std::ostringstream os;
  if (!ds.ids.empty()) os << "id" << delim;
  for (std::size_t j = 0; j < ds.dim(); ++j) os << 'e' << j << delim;
  os << 'y' << delim << 'z';
  if (ds.has_splits()) os << delim << "split";
  os << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.ids.empty()) os << ds.ids[i] << delim;
    for (double v : ds.x.row(i)) os << io::format_double(v) << delim;
    os << ds.y[i] << delim << io::format_double(ds.z[i]);
    if (ds.has_splits()) os << delim << split_name(ds.split[i]);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// EMBD binary container, version 1:
//   "EMBD" | u32 version | u8 endianness (1 = little) | u8 float width (4|8) |
//   u8 z kind (0 binary, 1 continuous) | u8 flags (1 splits, 2 ids) |
//   u64 rows | u64 cols | rows*cols floats | rows i32 y | rows f64 z |
//   [rows u8 split] | [rows x (u32 length, bytes) id]

inline constexpr std::uint32_t kEmbdVersion = 1;

inline std::string format_embd(const Dataset& ds, int float_width = 8) {
  if (float_width != 4 && float_width != 8) throw InputError("EMBD float width must be 4 or 8");
  std::ostringstream os(std::ios::binary);
  os.write("EMBD", 4);
  io::put_u32(os, kEmbdVersion);
  io::put_u8(os, 1);
  io::put_u8(os, static_cast<std::uint8_t>(float_width));
  io::put_u8(os, ds.z_continuous ? 1 : 0);
  io::put_u8(os, static_cast<std::uint8_t>((ds.has_splits() ? 1 : 0) | (ds.ids.empty() ? 0 : 2)));
  io::put_u64(os, ds.size());
  io::put_u64(os, ds.dim());
  for (double v : ds.x.data()) {
    if (float_width == 8) io::put_f64(os, v);
    else io::put_f32(os, static_cast<float>(v));
  }
  for (int v : ds.y) io::put_i32(os, v);
  for (double v : ds.z) io::put_f64(os, v);
  if (ds.has_splits())
    for (auto s : ds.split) io::put_u8(os, static_cast<std::uint8_t>(s));
  for (const auto& id : ds.ids) {
    io::put_u32(os, static_cast<std::uint32_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  return os.str();
}

inline Dataset parse_embd(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != "EMBD") throw HeaderError("bad EMBD magic");
  const auto version = io::get_u32(is, "EMBD version");
  if (version != kEmbdVersion) throw VersionError("unsupported EMBD version " + std::to_string(version));
  const auto endian = io::get_u8(is, "EMBD endianness");
  if (endian != 1) throw HeaderError("unsupported EMBD endianness byte " + std::to_string(endian));
  const auto width = io::get_u8(is, "EMBD float width");
  if (width != 4 && width != 8) throw HeaderError("bad EMBD float width " + std::to_string(width));
  const auto zkind = io::get_u8(is, "EMBD z kind");
  if (zkind > 1) throw HeaderError("bad EMBD z kind");
  const auto flags = io::get_u8(is, "EMBD flags");
  if (flags > 3) throw HeaderError("bad EMBD flags");
  const auto rows = io::get_u64(is, "EMBD rows");
  const auto cols = io::get_u64(is, "EMBD cols");
  const std::uint64_t remaining = bytes.size() - static_cast<std::uint64_t>(is.tellg());
  const std::uint64_t need = rows * cols * width + rows * (4 + 8) + ((flags & 1) ? rows : 0);
  if (cols == 0 && rows > 0) throw HeaderError("EMBD with zero columns");
  if ((cols && rows > remaining / cols) || need > remaining) {
    throw PayloadLengthError("EMBD payload shorter than header declares (" + std::to_string(remaining) +
                             " bytes left, need " + std::to_string(need) + ")");
  }
  Dataset ds;
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = width == 8 ? io::get_f64(is, "EMBD data") : static_cast<double>(io::get_f32(is, "EMBD data"));
  ds.x = Matrix(rows, cols, std::move(values));
  ds.y.resize(rows);
  for (auto& v : ds.y) v = io::get_i32(is, "EMBD y");
  ds.z.resize(rows);
  for (auto& v : ds.z) v = io::get_f64(is, "EMBD z");
  ds.z_continuous = zkind == 1;
  if (flags & 1) {
    ds.split.resize(rows);
    for (auto& s : ds.split) {
      const auto v = io::get_u8(is, "EMBD split");
      if (v > 2) throw FormatError("bad split code " + std::to_string(v));
      s = static_cast<Split>(v);
    }
  }
  if (flags & 2) {
    ds.ids.resize(rows);
    for (auto& id : ds.ids) {
      const auto len = io::get_u32(is, "EMBD id length");
      id.resize(len);
      io::read_exact(is, id.data(), len, "EMBD id");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw PayloadLengthError("trailing bytes after EMBD payload");
  ds.validate();
  return ds;
}

enum class DataFormat { kAuto, kText, kBinary };

inline DataFormat parse_format(const std::string& s) {
  if (s == "auto") return DataFormat::kAuto;
  if (s == "text" || s == "csv" || s == "tsv") return DataFormat::kText;
  if (s == "binary" || s == "embd") return DataFormat::kBinary;
  throw ConfigError("unknown data format '" + s + "'");
}

inline Dataset load_dataset(const std::filesystem::path& path, DataFormat fmt = DataFormat::kAuto) {
  const auto resolved = resolve_data_path(path);
  if (!std::filesystem::exists(resolved)) throw InputError("dataset not found: " + resolved.string());
  const std::string bytes = io::read_file(resolved);
  if (fmt == DataFormat::kAuto) fmt = bytes.rfind("EMBD", 0) == 0 ? DataFormat::kBinary : DataFormat::kText;
  return fmt == DataFormat::kBinary ? parse_embd(bytes) : parse_delimited(bytes);
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& ds,
                         DataFormat fmt = DataFormat::kBinary, int float_width = 8) {
  if (fmt == DataFormat::kAuto) {
    const auto ext = path.extension().string();
    fmt = (ext == ".csv" || ext == ".tsv" || ext == ".txt") ? DataFormat::kText : DataFormat::kBinary;
  }
  const char delim = path.extension() == ".tsv" ? '\t' : ',';
  io::write_file_atomic(path, fmt == DataFormat::kBinary ? format_embd(ds, float_width) : format_delimited(ds, delim));
}

// ---------------------------------------------------------------------------
// Word vectors: "word v1 ... vd" per line (GloVe text format).

struct WordEmbeddings {
  std::vector<std::string> words;
  Matrix vectors;
  std::unordered_map<std::string, std::size_t> index;

  bool contains(const std::string& w) const { return index.count(w) != 0; }
  std::span<const double> operator[](const std::string& w) const {
    auto it = index.find(w);
    if (it == index.end()) throw InputError("word not in embeddings: '" + w + "'");
    return vectors.row(it->second);
  }

  static WordEmbeddings from(std::vector<std::string> words, Matrix vectors) {
    if (words.size() != vectors.rows()) throw ShapeError("word count differs from vector rows");
    WordEmbeddings e{std::move(words), std::move(vectors), {}};
    for (std::size_t i = 0; i < e.words.size(); ++i) e.index.emplace(e.words[i], i);
    return e;
  }
};

inline WordEmbeddings parse_word_vectors(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> words;
  std::vector<double> values;
  std::size_t dim = 0, line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string word, tok;
    if (!(ls >> word)) continue;
    std::size_t count = 0;
    while (ls >> tok) {
      values.push_back(detail::parse_number(tok, line_no));
      ++count;
    }
    if (dim == 0) dim = count;
    if (count == 0 || count != dim) {
      throw RowLengthError("line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                           " components, got " + std::to_string(count));
    }
    words.push_back(word);
  }
  if (words.empty()) throw HeaderError("no word vectors found");
  const std::size_t n = words.size();
  return WordEmbeddings::from(std::move(words), Matrix(n, dim, std::move(values)));
}

inline WordEmbeddings load_word_vectors(const std::filesystem::path& path) {
  return parse_word_vectors(io::read_file(resolve_data_path(path)));
}

// One word per line; blank lines and '#' comments skipped.
inline std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::istringstream is(io::read_file(resolve_data_path(path)));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string w;
    if (ls >> w && w[0] != '#') out.push_back(w);
  }
  return out;
}

// "word label" per line, label 0 or 1.
inline std::unordered_map<std::string, int> load_lexicon(const std::filesystem::path& path) {
  std::istringstream is(io::read_file(resolve_data_path(path)));
  std::unordered_map<std::string, int> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string w;
    int label;
    if (!(ls >> w) || w[0] == '#') continue;
    if (!(ls >> label) || (label != 0 && label != 1))
      throw FormatError("lexicon line " + std::to_string(line_no) + ": expected 'word 0|1'");
    out[w] = label;
  }
  return out;
}

// Cosine-free projection of every word on the normalized (a - b) direction.
inline std::vector<double> bias_by_projection(const WordEmbeddings& emb, const std::string& word_a,
                                              const std::string& word_b) {
  auto va = emb[word_a];
  auto vb = emb[word_b];
  std::vector<double> dir(va.size());
  for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = va[i] - vb[i];
  const double n = norm(dir);
  if (n == 0.0) throw NumericError("anchor words have identical vectors");
  for (auto& v : dir) v /= n;
  std::vector<double> out(emb.words.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dot(emb.vectors.row(i), dir);
  return out;
}

// Labels the `per_side` words most aligned with (a - b) as z = 1 and the
// `per_side` most aligned with (b - a) as z = 0. Anchor words are excluded.
inline Dataset select_biased_words(const WordEmbeddings& emb, const std::string& word_a,
                                   const std::string& word_b, std::size_t per_side) {
  const auto score = bias_by_projection(emb, word_a, word_b);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < score.size(); ++i)
    if (emb.words[i] != word_a && emb.words[i] != word_b) order.push_back(i);
  if (order.size() < 2 * per_side) throw InputError("vocabulary too small for requested selection");
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] > score[b]; });
  std::vector<std::size_t> rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(per_side));
  rows.insert(rows.end(), order.end() - static_cast<std::ptrdiff_t>(per_side), order.end());
  Dataset ds;
  ds.x = take_rows(emb.vectors, rows);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ds.y.push_back(0);
    ds.z.push_back(k < per_side ? 1.0 : 0.0);
    ds.ids.push_back(emb.words[rows[k]]);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting

// Deterministic shuffled split into train/dev/test with exact global sizes
// round(ratio * n) (remainder to train) and stratification on binary z: rows are
// grouped by z, shuffled within group, and split labels are dealt by largest
// remainder so every contiguous run gets its proportional share.
inline Dataset split_dataset(Dataset ds, std::array<double, 3> ratios, std::uint64_t seed) {
  ds.validate();
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw InputError("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("split ratios must sum to 1");
  const std::size_t n = ds.size();
  std::array<std::size_t, 3> target{};
  target[1] = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  target[2] = static_cast<std::size_t>(std::llround(ratios[2] * static_cast<double>(n)));
  if (target[1] + target[2] > n) throw InputError("split ratios exceed row count");
  target[0] = n - target[1] - target[2];

  Rng rng(seed);
  std::vector<std::size_t> order;
  if (ds.z_continuous) {
    order = rng.permutation(n);
  } else {
    std::vector<std::size_t> g0, g1;
    for (std::size_t i = 0; i < n; ++i) (ds.z[i] > 0.5 ? g1 : g0).push_back(i);
    rng.shuffle(g0);
    rng.shuffle(g1);
    order = g0;
    order.insert(order.end(), g1.begin(), g1.end());
  }
  ds.split.assign(n, Split::kTrain);
  std::array<std::size_t, 3> dealt{};
  for (std::size_t pos = 0; pos < n; ++pos) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t k = 0; k < 3; ++k) {
      if (dealt[k] >= target[k]) continue;
      const double deficit = static_cast<double>(pos + 1) * static_cast<double>(target[k]) / static_cast<double>(n) -
                             static_cast<double>(dealt[k]);
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = k;
      }
    }
    ++dealt[best];
    ds.split[order[pos]] = static_cast<Split>(best);
  }
  if (!ds.z_continuous) {
    for (std::size_t k = 0; k < 3; ++k) {
      if (target[k] == 0) continue;
      std::size_t ones = 0, total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (ds.split[i] != static_cast<Split>(k)) continue;
        ++total;
        ones += ds.z[i] > 0.5;
      }
      if (ones < 2 || total - ones < 2) {
        throw DegenerateDataError(std::string("split '") + split_name(static_cast<Split>(k)) +
                                  "' receives fewer than 2 samples of a z group");
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic generators

enum class SynthKind { kLinearGaussian, kXor, kConcentric, kMixed };

inline SynthKind parse_synth_kind(const std::string& s) {
  if (s == "linear-gaussian" || s == "linear") return SynthKind::kLinearGaussian;
  if (s == "xor") return SynthKind::kXor;
  if (s == "concentric") return SynthKind::kConcentric;
  if (s == "mixed") return SynthKind::kMixed;
  throw ConfigError("unknown generator kind '" + s + "'");
}

inline const char* synth_kind_name(SynthKind k) {
  switch (k) {
    case SynthKind::kLinearGaussian: return "linear-gaussian";
    case SynthKind::kXor: return "xor";
    case SynthKind::kConcentric: return "concentric";
    case SynthKind::kMixed: return "mixed";
  }
  return "?";
}

struct SynthSpec {
  SynthKind kind = SynthKind::kLinearGaussian;
  std::size_t dim = 20;
  std::size_t n_train = 1000;
  std::size_t n_dev = 200;
  std::size_t n_test = 200;
  double balance = 0.5;     // P(z = 1)
  double noise = 1.0;       // per-coordinate standard deviation
  double shift = 4.0;       // linear z signal: class means at +-shift/2, in noise units
  double y_shift = 3.0;     // y signal: adjacent class means y_shift apart, in noise units
  double xor_margin = 0.0;  // xor coordinates keep |x| >= xor_margin, in noise units
  std::size_t num_classes = 2;
  double yz_coupling = 0.0;  // P(y copied from z); 0 => y independent of z
  bool scramble_z = false;   // redraw z independently of x after generation
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 2) throw ConfigError("synth.dim must be >= 2");
    if (n_train + n_dev + n_test < 4) throw ConfigError("synth needs at least 4 rows");
    if (!(balance > 0.0 && balance < 1.0)) throw ConfigError("synth.balance must be in (0,1)");
    if (!(noise > 0.0)) throw ConfigError("synth.noise must be > 0");
    if (num_classes < 2) throw ConfigError("synth.num_classes must be >= 2");
    if (!(yz_coupling >= 0.0 && yz_coupling <= 1.0)) throw ConfigError("synth.yz_coupling must be in [0,1]");
    if (kind == SynthKind::kMixed && dim < 3) throw ConfigError("mixed generator needs dim >= 3");
    if (!(xor_margin >= 0.0)) throw ConfigError("synth.xor_margin must be >= 0");
  }

  // Coordinates that carry z.
  std::vector<std::size_t> z_coords() const {
    switch (kind) {
      case SynthKind::kLinearGaussian: return {0};
      case SynthKind::kXor:
      case SynthKind::kConcentric: return {0, 1};
      case SynthKind::kMixed: return {0, 1, 2};
    }
    return {};
  }

  // Coordinate that carries y, if one is left over.
  std::optional<std::size_t> y_coord() const {
    const auto zc = z_coords();
    if (dim > zc.back() + 1) return dim - 1;
    return std::nullopt;
  }
};

// linear-gaussian: x0 ~ N(+-shift/2, 1) by z.  xor: z = [x0 > 0] xor [x1 > 0].
// concentric: z = [|(x0, x1)| > median radius].  mixed: x0 linear as above and
// (x1, x2) xor-encoded.  y lives on the last coordinate only, so it is
// recoverable after any erasure confined to the z coordinates. All scaled by noise.
inline Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.n_train + spec.n_dev + spec.n_test;
  const double s = spec.noise;
  const auto ycoord = spec.y_coord();
  const double median_radius = std::sqrt(2.0 * std::log(2.0));
  Dataset ds;
  ds.x = Matrix(n, spec.dim);
  ds.y.resize(n);
  ds.z.resize(n);
  ds.split.resize(n);
  auto xor_pair = [&](std::span<double> row, std::size_t a, std::size_t b, bool z) {
    double u = rng.normal();
    u += std::copysign(spec.xor_margin, u);
    const double v = std::abs(rng.normal()) + spec.xor_margin;
    const bool sign_b = (u > 0.0) != z;
    row[a] = s * u;
    row[b] = s * (sign_b ? v : -v);
  };
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.x.row(i);
    for (auto& v : row) v = s * rng.normal();
    const bool z = rng.bernoulli(spec.balance);
    switch (spec.kind) {
      case SynthKind::kLinearGaussian:
        row[0] = s * rng.normal(z ? spec.shift / 2 : -spec.shift / 2, 1.0);
        break;
      case SynthKind::kXor:
        xor_pair(row, 0, 1, z);
        break;
      case SynthKind::kConcentric: {
        double a, b;
        do {
          a = rng.normal();
          b = rng.normal();
        } while ((std::hypot(a, b) > median_radius) != z);
        row[0] = s * a;
        row[1] = s * b;
        break;
      }
      case SynthKind::kMixed:
        row[0] = s * rng.normal(z ? spec.shift / 2 : -spec.shift / 2, 1.0);
        xor_pair(row, 1, 2, z);
        break;
    }
    int y;
    if (spec.yz_coupling > 0.0 && rng.bernoulli(spec.yz_coupling)) {
      y = static_cast<int>(z) % static_cast<int>(spec.num_classes);
    } else {
      y = static_cast<int>(rng.below(spec.num_classes));
    }
    if (ycoord) {
      const double centre = (static_cast<double>(y) - 0.5 * static_cast<double>(spec.num_classes - 1)) * spec.y_shift;
      row[*ycoord] = s * rng.normal(centre, 1.0);
    }
    ds.y[i] = y;
    ds.z[i] = z ? 1.0 : 0.0;
    ds.split[i] = i < spec.n_train ? Split::kTrain : (i < spec.n_train + spec.n_dev ? Split::kDev : Split::kTest);
  }
  if (spec.scramble_z) {
    Rng scramble = rng.fork(1);
    for (std::size_t i = 0; i < n; ++i) ds.z[i] = scramble.bernoulli(spec.balance) ? 1.0 : 0.0;
  }
  ds.validate();
  return ds;
}

}  // namespace igbp
