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

#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "igbp/igbp.hpp"
#include "test_util.hpp"

namespace igbp {
namespace {

namespace fs = std::filesystem;
using testing::fast_train_config;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("igbp_data_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

const char* kThreeRows =
    "id,e0,e1,y,z,split\n"
    "alpha,0.5,-1.25,1,0,train\n"
    "beta,3,0.125,0,1,dev\n"
    "gamma,-2.5,1e-3,2,1,test\n";

Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.x = testing::random_matrix(n, d, rng);
  for (std::size_t i = 0; i < n; ++i) {
    ds.y.push_back(static_cast<int>(rng.below(3)));
    ds.z.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
    ds.split.push_back(static_cast<Split>(rng.below(3)));
  }
  return ds;
}

// --- delimited text --------------------------------------------------------

TEST(Delimited, ParsesHandWrittenRows) {
  const Dataset ds = parse_delimited(kThreeRows);
  ASSERT_EQ(ds.size(), 3u);
  ASSERT_EQ(ds.dim(), 2u);
  EXPECT_EQ(ds.x(0, 1), -1.25);
  EXPECT_EQ(ds.x(2, 1), 1e-3);
  EXPECT_EQ(ds.y, (std::vector<int>{1, 0, 2}));
  EXPECT_EQ(ds.z, (std::vector<double>{0, 1, 1}));
  EXPECT_EQ(ds.ids, (std::vector<std::string>{"alpha", "beta", "gamma"}));
  EXPECT_EQ(ds.split, (std::vector<Split>{Split::kTrain, Split::kDev, Split::kTest}));
  EXPECT_FALSE(ds.z_continuous);
}

TEST(Delimited, ThreeRowsRoundTripThroughSaveAndLoad) {
  TempDir dir;
  const Dataset ds = parse_delimited(kThreeRows);
  save_dataset(dir / "rows.csv", ds, DataFormat::kAuto);
  EXPECT_EQ(load_dataset(dir / "rows.csv"), ds);
  save_dataset(dir / "rows.tsv", ds, DataFormat::kAuto);
  EXPECT_NE(io::read_file(dir / "rows.tsv").find('\t'), std::string::npos);
  EXPECT_EQ(load_dataset(dir / "rows.tsv"), ds);
}

TEST(Delimited, TextRoundTripPreservesEveryDouble) {
  const Dataset ds = random_dataset(50, 7, 1);
  EXPECT_EQ(parse_delimited(format_delimited(ds)), ds);
}

TEST(Delimited, TabDelimiterIsDetected) {
  const Dataset ds = parse_delimited("e0\te1\tz\n1\t2\t1\n3\t4\t0\n");
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.x(1, 0), 3.0);
  EXPECT_EQ(ds.y, (std::vector<int>{0, 0}));
  EXPECT_TRUE(ds.split.empty());
}

TEST(Delimited, NonBinaryZIsContinuous) {
  const Dataset ds = parse_delimited("e0,z\n1,0.25\n2,1\n");
  EXPECT_TRUE(ds.z_continuous);
}

TEST(Delimited, MalformedHeaderIsAHeaderError) {
  EXPECT_THROW(parse_delimited(""), HeaderError);
  EXPECT_THROW(parse_delimited("e0,e1,y\n1,2,0\n"), HeaderError);       // no z
  EXPECT_THROW(parse_delimited("y,z\n0,1\n"), HeaderError);             // no embedding columns
  EXPECT_THROW(parse_delimited("e0,z,z\n1,0,0\n"), HeaderError);        // duplicate
  EXPECT_THROW(parse_delimited("e0,,z\n1,2,0\n"), HeaderError);         // empty name
}

TEST(Delimited, RowLengthMismatchIsARowLengthError) {
  EXPECT_THROW(parse_delimited("e0,e1,z\n1,2,0\n1,2\n"), RowLengthError);
  EXPECT_THROW(parse_delimited("e0,e1,z\n1,2,0,7\n"), RowLengthError);
}

TEST(Delimited, BadValuesAreFormatErrors) {
  EXPECT_THROW(parse_delimited("e0,z\n1,x\n"), FormatError);
  EXPECT_THROW(parse_delimited("e0,z\n1e999,1\n"), FormatError);
  EXPECT_THROW(parse_delimited("e0,y,z\n1,0.5,1\n"), FormatError);
  EXPECT_THROW(parse_delimited("e0,z,split\n1,1,holdout\n"), FormatError);
}

// --- EMBD binary -----------------------------------------------------------

TEST(Embd, Float64RoundTripIsBitwise) {
  TempDir dir;
  Dataset ds = random_dataset(40, 5, 2);
  ds.x(3, 2) = -0.0;
  ds.x(4, 1) = 5e-324;
  ds.ids.assign(40, "w");
  ds.ids[7] = "";
  ds.ids[8] = "naïve";
  save_dataset(dir / "d.embd", ds, DataFormat::kBinary, 8);
  const Dataset back = load_dataset(dir / "d.embd");
  ASSERT_EQ(back.x.data().size(), ds.x.data().size());
  for (std::size_t i = 0; i < ds.x.data().size(); ++i)
    ASSERT_EQ(std::bit_cast<std::uint64_t>(back.x.data()[i]), std::bit_cast<std::uint64_t>(ds.x.data()[i]));
  EXPECT_EQ(back.y, ds.y);
  EXPECT_EQ(back.z, ds.z);
  EXPECT_EQ(back.split, ds.split);
  EXPECT_EQ(back.ids, ds.ids);
}

TEST(Embd, Float32LoadMatchesFloat64LoadWithinCastError) {
  const Dataset ds = random_dataset(200, 6, 3);
  const Dataset d64 = parse_embd(format_embd(ds, 8));
  const Dataset d32 = parse_embd(format_embd(ds, 4));
  for (std::size_t i = 0; i < ds.x.data().size(); ++i) {
    const double v = d64.x.data()[i];
    // Oracle: the float32 file holds exactly the single-precision cast.
    EXPECT_EQ(d32.x.data()[i], static_cast<double>(static_cast<float>(v)));
    EXPECT_NEAR(d32.x.data()[i], v, 1e-6);
  }
  EXPECT_EQ(d32.y, d64.y);
  EXPECT_EQ(d32.z, d64.z);
}

TEST(Embd, HeaderLayoutIsLittleEndian) {
  Dataset ds;
  ds.x = Matrix(1, 1, {1.0});
  ds.y = {0};
  ds.z = {1.0};
  const std::string b = format_embd(ds, 8);
  ASSERT_GE(b.size(), 28u);
  EXPECT_EQ(b.substr(0, 4), "EMBD");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1u);  // version, low byte first
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 1u);  // endianness byte
  EXPECT_EQ(static_cast<unsigned char>(b[9]), 8u);  // float width
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 1u);  // rows
  EXPECT_EQ(static_cast<unsigned char>(b[20]), 1u);  // cols
  EXPECT_EQ(b.size(), 4 + 4 + 4 + 8 + 8 + 8 + 4 + 8u);
}

TEST(Embd, TruncatedPayloadIsAPayloadLengthError) {
  const std::string b = format_embd(random_dataset(10, 3, 4), 8);
  EXPECT_THROW(parse_embd(b.substr(0, b.size() - 1)), PayloadLengthError);
  EXPECT_THROW(parse_embd(b.substr(0, 40)), PayloadLengthError);
  EXPECT_THROW(parse_embd(b + "x"), PayloadLengthError);
}

TEST(Embd, UnknownVersionIsAVersionError) {
  std::string b = format_embd(random_dataset(3, 2, 5), 8);
  b[4] = 2;
  EXPECT_THROW(parse_embd(b), VersionError);
}

TEST(Embd, MalformedHeaderIsAHeaderError) {
  const std::string good = format_embd(random_dataset(3, 2, 6), 8);
  std::string b = good;
  b[0] = 'X';
  EXPECT_THROW(parse_embd(b), HeaderError);
  b = good;
  b[8] = 2;  // big-endian marker is not supported
  EXPECT_THROW(parse_embd(b), HeaderError);
  b = good;
  b[9] = 2;  // float width
  EXPECT_THROW(parse_embd(b), HeaderError);
  EXPECT_THROW(parse_embd("EMB"), HeaderError);
}

TEST(Embd, ErrorKindsAreDistinct) {
  // A truncated header field is reported as a payload problem, not a version one.
  EXPECT_THROW(parse_embd(std::string("EMBD\x01", 5)), FormatError);
  try {
    parse_embd(std::string("EMBD\x07\0\0\0", 8));
    FAIL();
  } catch (const VersionError&) {
  } catch (...) {
    FAIL() << "expected VersionError";
  }
}

TEST(LoadDataset, MissingFileIsAnInputError) {
  EXPECT_THROW(load_dataset("/nonexistent/igbp/file.csv"), InputError);
}

TEST(LoadDataset, FormatIsAutodetected) {
  TempDir dir;
  const Dataset ds = random_dataset(5, 2, 7);
  save_dataset(dir / "a.bin", ds, DataFormat::kBinary);
  save_dataset(dir / "b.csv", ds, DataFormat::kText);
  EXPECT_EQ(load_dataset(dir / "a.bin"), ds);
  EXPECT_EQ(load_dataset(dir / "b.csv"), ds);
  EXPECT_EQ(load_dataset(dir / "a.bin", DataFormat::kBinary), ds);
  EXPECT_THROW(load_dataset(dir / "a.bin", DataFormat::kText), FormatError);
}

TEST(LoadDataset, RelativePathsResolveAgainstTheDataRoot) {
  TempDir dir;
  const Dataset ds = random_dataset(5, 2, 8);
  save_dataset(dir / "rel.embd", ds);
  ::setenv(kDataRootEnv, dir.path().c_str(), 1);
  EXPECT_EQ(resolve_data_path("rel.embd"), dir / "rel.embd");
  EXPECT_EQ(load_dataset("rel.embd"), ds);
  EXPECT_EQ(resolve_data_path("/abs/x"), fs::path("/abs/x"));
  ::unsetenv(kDataRootEnv);
  EXPECT_EQ(resolve_data_path("rel.embd"), fs::path("rel.embd"));
}

// --- splitting -------------------------------------------------------------

TEST(Split, SizesFollowTheRatios) {
  Dataset ds = random_dataset(1000, 3, 9);
  ds.split.clear();
  const Dataset s = split_dataset(ds, {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(s.indices(Split::kTrain).size(), 800u);
  EXPECT_EQ(s.indices(Split::kDev).size(), 100u);
  EXPECT_EQ(s.indices(Split::kTest).size(), 100u);
  EXPECT_EQ(s.x, ds.x);
}

TEST(Split, SameSeedSameAssignment) {
  Dataset ds = random_dataset(500, 3, 10);
  const Dataset a = split_dataset(ds, {0.6, 0.2, 0.2}, 42);
  const Dataset b = split_dataset(ds, {0.6, 0.2, 0.2}, 42);
  const Dataset c = split_dataset(ds, {0.6, 0.2, 0.2}, 43);
  EXPECT_EQ(a.split, b.split);
  EXPECT_NE(a.split, c.split);
}

TEST(Split, StratifiesAnImbalancedAttribute) {
  Rng rng(11);
  Dataset ds;
  const std::size_t n = 1000;
  ds.x = testing::random_matrix(n, 2, rng);
  ds.y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) ds.z.push_back(i < 700 ? 1.0 : 0.0);
  const Dataset s = split_dataset(ds, {0.8, 0.1, 0.1}, 5);
  for (Split sp : {Split::kTrain, Split::kDev, Split::kTest}) {
    const auto v = s.view(sp);
    double ones = 0;
    for (double z : v.z) ones += z;
    EXPECT_NEAR(ones / static_cast<double>(v.z.size()), 0.7, 0.02) << split_name(sp);
  }
}

TEST(Split, TooFewOfAGroupIsAnError) {
  Rng rng(12);
  Dataset ds;
  ds.x = testing::random_matrix(100, 2, rng);
  ds.y.assign(100, 0);
  ds.z.assign(100, 0.0);
  ds.z[0] = ds.z[1] = ds.z[2] = 1.0;
  EXPECT_THROW(split_dataset(ds, {0.8, 0.1, 0.1}, 1), DegenerateDataError);
}

TEST(Split, RatiosMustSumToOne) {
  const Dataset ds = random_dataset(100, 2, 13);
  EXPECT_THROW(split_dataset(ds, {0.5, 0.1, 0.1}, 1), InputError);
  EXPECT_THROW(split_dataset(ds, {1.2, -0.1, -0.1}, 1), InputError);
}

TEST(Split, ContinuousAttributeIsShuffledWithoutStratification) {
  Dataset ds = random_dataset(100, 2, 14);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.z[i] = 0.01 * static_cast<double>(i);
  ds.z_continuous = true;
  const Dataset s = split_dataset(ds, {0.5, 0.25, 0.25}, 3);
  EXPECT_EQ(s.indices(Split::kDev).size(), 25u);
}

// --- synthetic generators --------------------------------------------------

SynthSpec spec_of(SynthKind kind, std::size_t dim, std::uint64_t seed) {
  SynthSpec s;
  s.kind = kind;
  s.dim = dim;
  s.n_train = 5000;
  s.n_dev = 2000;
  s.n_test = 0;
  s.seed = seed;
  return s;
}

double dev_accuracy(const Dataset& ds, const ProbeArchitecture& arch, TrainConfig cfg = fast_train_config()) {
  const auto tr = ds.view(Split::kTrain), dv = ds.view(Split::kDev);
  Rng rng(1);
  const Probe p = train_probe(tr.x, tr.z, arch, cfg, rng);
  return accuracy(p, dv.x, dv.z);
}

TEST(Synthetic, XorInTwoDimensionsDefeatsLinearProbes) {
  const Dataset ds = generate_synthetic(spec_of(SynthKind::kXor, 2, 20));
  EXPECT_LE(dev_accuracy(ds, ProbeArchitecture::linear(2)), 0.60);
  EXPECT_GE(dev_accuracy(ds, ProbeArchitecture::mlp(2, {16})), 0.95);
}

TEST(Synthetic, XorLabelIsTheSignParity) {
  const Dataset ds = generate_synthetic(spec_of(SynthKind::kXor, 4, 21));
  for (std::size_t i = 0; i < ds.size(); ++i)
    ASSERT_EQ(ds.z[i] == 1.0, (ds.x(i, 0) > 0) != (ds.x(i, 1) > 0));
}

TEST(Synthetic, ShiftedGaussianIsLinearlyDecodable) {
  // Class means 4 sigma either side of the origin: the Bayes rule on x0 errs
  // with probability 1 - Phi(4), so a linear probe has ample room above 0.99.
  SynthSpec s = spec_of(SynthKind::kLinearGaussian, 10, 22);
  s.shift = 2 * 4.0;
  const double bayes = 0.5 * std::erfc(-4.0 / std::sqrt(2.0));
  ASSERT_GE(bayes, 0.9999);
  EXPECT_GE(dev_accuracy(generate_synthetic(s), ProbeArchitecture::linear(10)), 0.99);
}

TEST(Synthetic, ConcentricShellsSplitAtTheMedianRadius) {
  const Dataset ds = generate_synthetic(spec_of(SynthKind::kConcentric, 3, 23));
  double ones = 0;
  for (double z : ds.z) ones += z;
  EXPECT_NEAR(ones / static_cast<double>(ds.size()), 0.5, 0.03);
  EXPECT_LE(dev_accuracy(ds, ProbeArchitecture::linear(3)), 0.60);
  EXPECT_GE(dev_accuracy(ds, ProbeArchitecture::mlp(3, {32})), 0.90);
}

TEST(Synthetic, MixedCarriesBothEncodings) {
  const Dataset ds = generate_synthetic(spec_of(SynthKind::kMixed, 6, 24));
  for (std::size_t i = 0; i < ds.size(); ++i)
    ASSERT_EQ(ds.z[i] == 1.0, (ds.x(i, 1) > 0) != (ds.x(i, 2) > 0));
  const double lin = dev_accuracy(ds, ProbeArchitecture::linear(6));
  EXPECT_GT(lin, 0.9);
  EXPECT_LT(lin, 0.99);
}

TEST(Synthetic, MainTaskIsIndependentOfTheAttribute) {
  SynthSpec s = spec_of(SynthKind::kLinearGaussian, 10, 25);
  const Dataset a = generate_synthetic(s);
  s.scramble_z = true;
  const Dataset b = generate_synthetic(s);
  auto y_acc = [](const Dataset& ds) {
    const auto tr = ds.view(Split::kTrain), dv = ds.view(Split::kDev);
    return LogisticHead::fit(tr.x, tr.y).accuracy(dv.x, dv.y);
  };
  EXPECT_EQ(a.x, b.x);
  EXPECT_NE(a.z, b.z);
  EXPECT_NEAR(y_acc(a), y_acc(b), 0.01);
  EXPECT_GT(y_acc(a), 0.9);
}

TEST(Synthetic, SplitSizesAndBalance) {
  SynthSpec s = spec_of(SynthKind::kLinearGaussian, 4, 26);
  s.n_test = 300;
  s.balance = 0.3;
  const Dataset ds = generate_synthetic(s);
  EXPECT_EQ(ds.indices(Split::kTrain).size(), 5000u);
  EXPECT_EQ(ds.indices(Split::kDev).size(), 2000u);
  EXPECT_EQ(ds.indices(Split::kTest).size(), 300u);
  double ones = 0;
  for (double z : ds.z) ones += z;
  EXPECT_NEAR(ones / static_cast<double>(ds.size()), 0.3, 0.02);
}

TEST(Synthetic, SameSeedSameDataset) {
  const SynthSpec s = spec_of(SynthKind::kMixed, 5, 27);
  EXPECT_EQ(generate_synthetic(s), generate_synthetic(s));
  SynthSpec t = s;
  t.seed = 28;
  EXPECT_NE(generate_synthetic(s).x, generate_synthetic(t).x);
}

TEST(Synthetic, CouplingCopiesTheAttributeIntoTheLabel) {
  SynthSpec s = spec_of(SynthKind::kLinearGaussian, 4, 29);
  s.yz_coupling = 1.0;
  const Dataset ds = generate_synthetic(s);
  for (std::size_t i = 0; i < ds.size(); ++i) ASSERT_EQ(ds.y[i], static_cast<int>(ds.z[i]));
}

TEST(Synthetic, InvalidSpecsAreRejected) {
  SynthSpec s;
  s.dim = 1;
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  s = SynthSpec{};
  s.n_train = 2;
  s.n_dev = s.n_test = 0;
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  s = SynthSpec{};
  s.balance = 1.0;
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  s = SynthSpec{};
  s.kind = SynthKind::kMixed;
  s.dim = 2;
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  EXPECT_THROW(parse_synth_kind("spiral"), ConfigError);
  EXPECT_EQ(parse_synth_kind(synth_kind_name(SynthKind::kConcentric)), SynthKind::kConcentric);
}

// --- word vectors ----------------------------------------------------------

const char* kWords =
    "he 1 0 0\n"
    "she -1 0 0\n"
    "king 0.9 0.1 0\n"
    "queen -0.8 0.2 0\n"
    "table 0 1 0\n"
    "nurse -0.5 0 1\n"
    "engineer 0.4 0 1\n";

TEST(WordVectors, ParsesGloveText) {
  const auto emb = parse_word_vectors(kWords);
  EXPECT_EQ(emb.words.size(), 7u);
  EXPECT_EQ(emb.vectors.cols(), 3u);
  EXPECT_EQ(emb["queen"][1], 0.2);
  EXPECT_TRUE(emb.contains("nurse"));
  EXPECT_FALSE(emb.contains("doctor"));
  EXPECT_THROW(emb["doctor"], InputError);
}

TEST(WordVectors, RaggedRowsAreRowLengthErrors) {
  EXPECT_THROW(parse_word_vectors("a 1 2\nb 1\n"), RowLengthError);
  EXPECT_THROW(parse_word_vectors("a\n"), RowLengthError);
  EXPECT_THROW(parse_word_vectors("\n\n"), HeaderError);
}

TEST(WordVectors, BiasByProjectionOnTheAnchorDirection) {
  const auto emb = parse_word_vectors(kWords);
  const auto s = bias_by_projection(emb, "he", "she");
  // (he - she) / |he - she| = e0, so the score is the first coordinate.
  for (std::size_t i = 0; i < emb.words.size(); ++i) EXPECT_DOUBLE_EQ(s[i], emb.vectors(i, 0));
  EXPECT_THROW(bias_by_projection(emb, "he", "he"), NumericError);
}

TEST(WordVectors, SelectsTheMostBiasedWordsPerSide) {
  const auto emb = parse_word_vectors(kWords);
  const Dataset ds = select_biased_words(emb, "he", "she", 2);
  EXPECT_EQ(ds.ids, (std::vector<std::string>{"king", "engineer", "nurse", "queen"}));
  EXPECT_EQ(ds.z, (std::vector<double>{1, 1, 0, 0}));
  EXPECT_EQ(ds.x(3, 0), -0.8);
  EXPECT_THROW(select_biased_words(emb, "he", "she", 3), InputError);
}

TEST(WordVectors, LexiconAndWordListFiles) {
  TempDir dir;
  io::write_file_atomic(dir / "lex.txt", "# gender lexicon\nking 1\nqueen 0\n\n");
  io::write_file_atomic(dir / "list.txt", "king\n# skip\n\nqueen  \n");
  io::write_file_atomic(dir / "bad.txt", "king 2\n");
  const auto lex = load_lexicon(dir / "lex.txt");
  EXPECT_EQ(lex.size(), 2u);
  EXPECT_EQ(lex.at("king"), 1);
  EXPECT_EQ(lex.at("queen"), 0);
  EXPECT_EQ(load_word_list(dir / "list.txt"), (std::vector<std::string>{"king", "queen"}));
  EXPECT_THROW(load_lexicon(dir / "bad.txt"), FormatError);
}

TEST(Dataset, ValidateChecksShapes) {
  Dataset ds = random_dataset(4, 2, 30);
  ds.y.pop_back();
  EXPECT_THROW(ds.validate(), ShapeError);
  ds = random_dataset(4, 2, 30);
  ds.z[0] = 0.5;
  EXPECT_THROW(ds.validate(), InputError);
  ds = random_dataset(4, 2, 30);
  ds.x(0, 0) = std::nan("");
  EXPECT_THROW(ds.validate(), InputError);
  EXPECT_DOUBLE_EQ(majority_rate(std::vector<double>{1, 1, 0}), 2.0 / 3.0);
}

}  // namespace
}  // namespace igbp
