#include <cmath>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "tailmem/bitset.h"
#include "tailmem/dataset.h"
#include "tailmem/rng.h"
#include "tailmem/text_io.h"
#include "test_util.h"

namespace tailmem {
namespace {

TEST(Zipf, SingleAtom) { EXPECT_EQ(ZipfFrequencies(1, 1.0), std::vector<double>{1.0}); }

TEST(Zipf, ThreeSubpopulations) {
  const auto f = ZipfFrequencies(3, 1.0);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_NEAR(f[0], 6.0 / 11.0, 1e-15);
  EXPECT_NEAR(f[1], 3.0 / 11.0, 1e-15);
  EXPECT_NEAR(f[2], 2.0 / 11.0, 1e-15);
}

TEST(Zipf, NearZeroExponentIsNearUniform) {
  for (double v : ZipfFrequencies(5, 1e-9)) EXPECT_NEAR(v, 0.2, 1e-6);
}

TEST(Zipf, RejectsBadArguments) {
  EXPECT_THROW(ZipfFrequencies(0, 1.0), std::invalid_argument);
  EXPECT_THROW(ZipfFrequencies(5, 0.0), std::invalid_argument);
  EXPECT_THROW(ZipfFrequencies(5, -1.0), std::invalid_argument);
}

TEST(Zipf, SumsToOnePositiveNonIncreasing) {
  for (size_t n : {size_t{1}, size_t{2}, size_t{100}, size_t{10'000}, size_t{1'000'000}}) {
    for (double s : {0.5, 1.0, 2.0}) {
      const auto f = ZipfFrequencies(n, s);
      double sum = 0.0;
      for (size_t k = 0; k < f.size(); ++k) {
        ASSERT_GT(f[k], 0.0);
        if (k > 0) ASSERT_LE(f[k], f[k - 1]);
      }
      // Smallest-first summation keeps the rounding error low.
      for (size_t k = f.size(); k-- > 0;) sum += f[k];
      EXPECT_NEAR(sum, 1.0, 1e-12) << "n=" << n << " s=" << s;
    }
  }
}

TEST(Dataset, ValidatesConstruction) {
  EXPECT_THROW(LabeledDataset({"a"}, {1.0}, {0}, 0, 2), std::invalid_argument);
  EXPECT_THROW(LabeledDataset({"a"}, {1.0}, {0}, 1, 1), std::invalid_argument);
  EXPECT_THROW(LabeledDataset({"a"}, {1.0, 2.0}, {0}, 1, 2), std::invalid_argument);
  EXPECT_THROW(LabeledDataset({"a"}, {1.0}, {2}, 1, 2), std::invalid_argument);
  EXPECT_THROW(LabeledDataset({"a", "a"}, {1.0, 2.0}, {0, 1}, 1, 2), std::invalid_argument);
}

TEST(Generator, DeterministicForSameSpec) {
  const SyntheticSpec spec;
  const SyntheticData a = GenerateLongtail(spec);
  const SyntheticData b = GenerateLongtail(spec);
  EXPECT_TRUE(a.train == b.train);
  EXPECT_TRUE(a.test == b.test);
  EXPECT_TRUE(a.truth == b.truth);
  SyntheticSpec other = spec;
  other.seed = spec.seed + 1;
  EXPECT_FALSE(GenerateLongtail(other).train == a.train);
}

TEST(Generator, ShapesAndGroundTruth) {
  const SyntheticSpec spec;
  const SyntheticData d = GenerateLongtail(spec);
  ASSERT_EQ(d.train.size(), 1000u);
  ASSERT_EQ(d.test.size(), 500u);
  EXPECT_EQ(d.train.dim(), 16);
  EXPECT_EQ(d.truth.train_subpop.size(), 1000u);
  EXPECT_EQ(d.truth.test_subpop.size(), 500u);
  EXPECT_EQ(std::accumulate(d.truth.train_count_of_subpop.begin(), d.truth.train_count_of_subpop.end(), 0), 1000);
  int flipped = 0;
  for (size_t i = 0; i < d.train.size(); ++i) {
    const int true_label = d.truth.train_subpop[i] % spec.num_classes;
    if (d.truth.train_mislabeled[i]) {
      ++flipped;
      EXPECT_NE(d.train.label(i), true_label);
    } else {
      EXPECT_EQ(d.train.label(i), true_label);
    }
  }
  EXPECT_EQ(flipped, std::lround(spec.noise_rate * spec.n_train));
  for (size_t j = 0; j < d.test.size(); ++j) EXPECT_EQ(d.test.label(j), d.truth.test_subpop[j] % spec.num_classes);
}

TEST(Generator, NoNoiseMeansNoFlags) {
  SyntheticSpec spec;
  spec.noise_rate = 0.0;
  for (bool flag : GenerateLongtail(spec).truth.train_mislabeled) EXPECT_FALSE(flag);
}

TEST(Generator, MislabeledCountIsRoundedRate) {
  for (double rate : {0.013, 0.1, 0.25}) {
    SyntheticSpec spec;
    spec.noise_rate = rate;
    spec.n_train = 333;
    const auto flags = GenerateLongtail(spec).truth.train_mislabeled;
    EXPECT_EQ(std::count(flags.begin(), flags.end(), true), std::lround(rate * 333));
  }
}

TEST(Generator, CentersRespectSeparation) {
  SyntheticSpec spec;
  spec.n_subpop = 30;
  spec.n_train = 3000;  // every subpopulation sampled many times
  spec.noise_rate = 0.0;
  const SyntheticData d = GenerateLongtail(spec);
  // Empirical cluster means approximate the centers; their separation must be
  // close to at least cluster_sep.
  std::vector<std::vector<double>> mean(spec.n_subpop, std::vector<double>(spec.dim, 0.0));
  for (size_t i = 0; i < d.train.size(); ++i) {
    const auto x = d.train.features(i);
    for (int k = 0; k < spec.dim; ++k) mean[d.truth.train_subpop[i]][k] += x[k];
  }
  for (int s = 0; s < spec.n_subpop; ++s) {
    for (double& v : mean[s]) v /= std::max(1, d.truth.train_count_of_subpop[s]);
  }
  for (int a = 0; a < spec.n_subpop; ++a) {
    for (int b = a + 1; b < spec.n_subpop; ++b) {
      if (d.truth.train_count_of_subpop[a] < 20 || d.truth.train_count_of_subpop[b] < 20) continue;
      double dist = 0.0;
      for (int k = 0; k < spec.dim; ++k) dist += (mean[a][k] - mean[b][k]) * (mean[a][k] - mean[b][k]);
      EXPECT_GT(std::sqrt(dist), spec.cluster_sep - 2.0);
    }
  }
}

TEST(Generator, SubpopulationHistogramMatchesZipf) {
  SyntheticSpec spec;
  spec.n_subpop = 20;
  spec.num_classes = 10;
  spec.n_train = 50'000;
  spec.n_test = 10;
  spec.dim = 2;
  const auto d = GenerateLongtail(spec);
  const auto f = ZipfFrequencies(spec.n_subpop, spec.zipf_exponent);
  double chi2 = 0.0;
  for (int k = 0; k < spec.n_subpop; ++k) {
    const double expected = f[k] * spec.n_train;
    const double diff = d.truth.train_count_of_subpop[k] - expected;
    chi2 += diff * diff / expected;
  }
  // 19 degrees of freedom; the 0.999 quantile is 43.8.
  EXPECT_LT(chi2, 43.8);
}

// Frozen Monte-Carlo oracle: over 10,000 multinomial draws with N=100, s=1,
// n=1000 the number of subpopulations with exactly one training example has
// mean 10.5788 and per-draw std 2.8436.
TEST(Generator, SingletonSubpopulationCountMatchesMonteCarlo) {
  double total = 0.0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    SyntheticSpec spec;
    spec.dim = 2;
    spec.n_test = 1;
    spec.seed = 1000 + s;
    const auto counts = GenerateLongtail(spec).truth.train_count_of_subpop;
    total += std::count(counts.begin(), counts.end(), 1);
  }
  EXPECT_NEAR(total / seeds, 10.5788, 0.8);
}

TEST(Csv, ParsesTwoRowsWithoutHeader) {
  const auto dir = testing::ScratchDir("csv_two_rows");
  WriteTextFile(dir / "d.csv", "a,0,1.0,2.0\nb,1,3.0,4.0\n");
  const LabeledDataset d = LoadCsv(dir / "d.csv");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim(), 2);
  EXPECT_GE(d.num_classes(), 2);
  EXPECT_EQ(d.id(1), "b");
  EXPECT_EQ(d.features(1)[1], 4.0);
}

TEST(Csv, EmptyFileHasNoRows) {
  const auto dir = testing::ScratchDir("csv_empty");
  WriteTextFile(dir / "d.csv", "");
  try {
    LoadCsv(dir / "d.csv");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("no rows"), std::string::npos);
  }
}

TEST(Csv, ErrorsNameTheRow) {
  const auto dir = testing::ScratchDir("csv_errors");
  const std::pair<const char*, const char*> cases[] = {
      {"a,0,1.0,2.0\nb,1,3.0\n", "row 2"},
      {"a,0,1.0,2.0\nb,1,x,4.0\n", "row 2"},
      {"id,label,f0\na,0,1.0\nb,7,2.0\n", "row 3"},
  };
  for (const auto& [text, where] : cases) {
    WriteTextFile(dir / "d.csv", text);
    try {
      LoadCsv(dir / "d.csv", 3);
      FAIL() << "expected a parse error for " << text;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(where), std::string::npos) << e.what();
    }
  }
}

TEST(Csv, RoundTripIsExact) {
  const auto dir = testing::ScratchDir("csv_round_trip");
  const SyntheticData d = GenerateLongtail(SyntheticSpec{});
  SaveCsv(d.train, dir / "train.csv");
  EXPECT_TRUE(LoadCsv(dir / "train.csv", d.train.num_classes()) == d.train);
}

TEST(TextIo, ShortestRoundTripFormatting) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
    double back = 0.0;
    ASSERT_TRUE(ParseDouble(FormatDouble(v), back));
    EXPECT_EQ(back, v);
  }
  double out = 0.0;
  EXPECT_FALSE(ParseDouble("1.5x", out));
  EXPECT_FALSE(ParseDouble("", out));
}

TEST(Rng, KeyedStreamsAreReproducibleAndDistinct) {
  KeyedRng a(DeriveKey(7, {1, 2}));
  KeyedRng b(DeriveKey(7, {1, 2}));
  KeyedRng c(DeriveKey(7, {1, 3}));
  for (int k = 0; k < 100; ++k) {
    const uint64_t va = a.NextU64();
    EXPECT_EQ(va, b.NextU64());
    EXPECT_NE(va, c.NextU64());
  }
}

TEST(Rng, BelowIsUnbiasedEnough) {
  KeyedRng rng(42);
  std::vector<int> counts(7, 0);
  const int draws = 70'000;
  for (int k = 0; k < draws; ++k) ++counts[rng.Below(7)];
  for (int c : counts) EXPECT_NEAR(c, draws / 7.0, 5 * std::sqrt(draws / 7.0));
}

TEST(Rng, NormalMoments) {
  KeyedRng rng(3);
  double sum = 0.0, sq = 0.0;
  const int draws = 100'000;
  for (int k = 0; k < draws; ++k) {
    const double v = rng.Normal();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / draws, 0.0, 0.02);
  EXPECT_NEAR(sq / draws, 1.0, 0.02);
}

TEST(BitVector, BytesRoundTripAndCounts) {
  BitVector bits(13);
  for (size_t i : {0u, 3u, 8u, 12u}) bits.set(i);
  EXPECT_EQ(bits.count(), 4u);
  std::vector<uint8_t> bytes;
  bits.append_bytes(bytes);
  ASSERT_EQ(bytes.size(), 2u);
  EXPECT_EQ(bytes[0], 0b00001001);
  EXPECT_EQ(bytes[1], 0b00010001);
  EXPECT_TRUE(BitVector::FromBytes(bytes, 13) == bits);
  bytes[1] |= 0x80;
  EXPECT_THROW(BitVector::FromBytes(bytes, 13), std::invalid_argument);
  BitVector other(13);
  other.set(3);
  other.set(4);
  EXPECT_EQ(bits.count_and(other), 1u);
}

}  // namespace
}  // namespace tailmem
